"""Delayed-control switching model and the inverted-pendulum instantiation.

A stabilized plant ``x+ = A x + B u`` with ``u = K x`` occasionally misses a
control update and reuses the previous input. The augmented state is
``(x_t, x_hold)`` where ``x_hold`` is the state the current input was
computed from:

* mode 1 (update):   ``x+ = (A + B K) x``, ``x_hold+ = x``
* mode 2 (missed):   ``x+ = A x + B K x_hold + B w``, ``x_hold+ = x_hold``

Actuator disturbances ``w`` only act on missed updates, and the output is
the plant state. The default graph forbids three misses in a row: node
``a`` has no pending miss, ``b`` one, ``c`` two.

The physical constants below are our own completion of an under-specified
model (mass 2 kg, 100 Hz, LQR weights 1 and 10 are given; the rest is
chosen here). Numbers obtained with them are our instantiation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .system import SwitchingSystem, lift_to_rectangular

DEFAULT_DELAY_GRAPH: tuple[tuple[str, str, int], ...] = (
    ("a", "a", 1),
    ("a", "b", 2),
    ("b", "a", 1),
    ("b", "c", 2),
    ("c", "a", 1),
)


@dataclass(frozen=True)
class PendulumParameters:
    mass: float = 2.0  # kg
    length: float = 0.5  # m
    gravity: float = 9.81  # m/s^2
    damping: float = 0.0  # N m s / rad
    rate_hz: float = 100.0
    state_weight: float = 1.0
    input_weight: float = 10.0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def pendulum_plant(params: PendulumParameters = PendulumParameters()):
    """Zero-order-hold discretization of the pendulum linearized about upright,
    and its discrete LQR gain (``u = K x``).

    State is ``(angle, angular velocity)``, input is a torque.
    """
    inertia = params.mass * params.length**2
    Ac = np.array([[0.0, 1.0], [params.gravity / params.length, -params.damping / inertia]])
    Bc = np.array([[0.0], [1.0 / inertia]])
    dt = 1.0 / params.rate_hz
    M = np.zeros((3, 3))
    M[:2, :2], M[:2, 2:] = Ac, Bc
    Md = sla.expm(M * dt)
    A, B = Md[:2, :2], Md[:2, 2:]
    Q = params.state_weight * np.eye(2)
    R = params.input_weight * np.eye(1)
    P = sla.solve_discrete_are(A, B, Q, R)
    K = -np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    return A, B, K


def build_delayed_control_example(
    A, B, K_gain, edges: Sequence[tuple[str, str, int]] = DEFAULT_DELAY_GRAPH
) -> SwitchingSystem:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    n, q = B.shape
    K_gain = np.asarray(K_gain, dtype=float)
    if A.shape != (n, n) or K_gain.shape != (q, n):
        raise ValueError(f"shape mismatch: A {A.shape}, B {B.shape}, K {K_gain.shape}")
    I, Z = np.eye(n), np.zeros((n, n))
    C = np.hstack([I, Z])
    D = np.zeros((n, q))
    update = (np.block([[A + B @ K_gain, Z], [I, Z]]), np.zeros((2 * n, q)), C, D)
    missed = (np.block([[A, B @ K_gain], [Z, I]]), np.vstack([B, np.zeros((n, q))]), C, D)
    names = []
    for u, v, _ in edges:
        for name in (u, v):
            if name not in names:
                names.append(name)
    return lift_to_rectangular(names, [update, missed], list(edges))


def build_pendulum_example(
    params: PendulumParameters = PendulumParameters(),
    edges: Sequence[tuple[str, str, int]] = DEFAULT_DELAY_GRAPH,
) -> SwitchingSystem:
    A, B, K = pendulum_plant(params)
    return build_delayed_control_example(A, B, K, edges)
