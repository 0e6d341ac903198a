"""Closed-form fields used to manufacture boundary data and measure errors.

Every field is an object with ``evaluate(points) -> (values, gradients)`` of
shapes ``(N, s)`` and ``(N, s, 2)`` and ``neumann(points, normals) -> (N, s)``
giving the traction ``T u`` for the given operator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import KernelSet, apply_traction, kernel_derivatives, radial_sequence, radial_tensors


class ExactField:
    kernels: KernelSet

    def evaluate(self, points):
        raise NotImplementedError

    def __call__(self, points):
        return self.evaluate(points)

    def neumann(self, points, normals):
        _, grad = self.evaluate(points)
        n = np.asarray(normals, dtype=float)
        return apply_traction(grad[:, :, None, :], n, self.kernels)[:, :, 0]


@dataclass
class DipoleLaplace(ExactField):
    """``u = -x1 / |x|^2``, harmonic away from the origin."""

    kernels: KernelSet = KernelSet("laplace")

    def evaluate(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        x1, x2 = p[:, 0], p[:, 1]
        r2 = x1**2 + x2**2
        u = -x1 / r2
        g = np.stack([(x1**2 - x2**2) / r2**2, 2 * x1 * x2 / r2**2], axis=-1)
        return u[:, None], g[:, None, :]


@dataclass
class RadialHankel(ExactField):
    """``u = H0(k |x - c|)``, an outgoing Helmholtz solution."""

    k: float = 1.0
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        self.kernels = KernelSet("helmholtz", k=self.k)

    def evaluate(self, points):
        z = np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(self.center)
        r = np.linalg.norm(z, axis=1)
        g = radial_sequence([("hankel", 1.0, self.k)], r, 1)
        t = radial_tensors(g, z, 1)
        return t[0][:, None], t[1][:, None, :]


@dataclass
class KernelColumn(ExactField):
    """Column ``j`` of the fundamental solution with source point ``source``."""

    kernels: KernelSet = KernelSet("lame", lam=3.0, mu=2.0)
    source: tuple = (0.5, 0.0)
    column: int = 0

    def evaluate(self, points):
        z = np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(self.source)
        r = np.linalg.norm(z, axis=1)
        u, du = kernel_derivatives(self.kernels, z, r, 1)
        return u[:, :, self.column], du[:, :, self.column, :]


@dataclass
class PressureWave(ExactField):
    """``u = -grad H0(k_p |x|)``, an outgoing curl-free elastic wave."""

    kernels: KernelSet = KernelSet("navier", lam=0.5, mu=2.0, rho=0.5, omega=3.0)

    def evaluate(self, points):
        z = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.linalg.norm(z, axis=1)
        g = radial_sequence([("hankel", 1.0, self.kernels.kp)], r, 2)
        t = radial_tensors(g, z, 2)
        return -t[1], -t[2]


@dataclass
class PlaneWave(ExactField):
    """``u = exp(i k d . x)`` with unit direction ``d``."""

    k: float = 1.0
    direction: tuple = (1.0, 0.0)

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        nrm = np.linalg.norm(d)
        if not nrm > 0:
            raise ValueError("plane wave direction must be nonzero")
        self.direction = tuple(d / nrm)
        self.kernels = KernelSet("helmholtz", k=self.k)

    def evaluate(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        d = np.asarray(self.direction)
        u = np.exp(1j * self.k * p @ d)
        return u[:, None], (1j * self.k * u[:, None] * d[None, :])[:, None, :]

    def scalar(self, points):
        """Value ``(N,)`` and gradient ``(N, 2)`` for the incident-field interface."""
        u, g = self.evaluate(points)
        return u[:, 0], g[:, 0, :]


@dataclass
class ZeroField(ExactField):
    kernels: KernelSet = KernelSet("laplace")

    def evaluate(self, points):
        n = len(np.atleast_2d(points))
        s = self.kernels.sigma
        return np.zeros((n, s), dtype=complex), np.zeros((n, s, 2), dtype=complex)


def scattering_data(incident: PlaneWave):
    """Sound-hard scattering: ``g = -T u_inc`` on the obstacle."""

    def g(points, normals):
        return -incident.neumann(points, normals)

    return g
