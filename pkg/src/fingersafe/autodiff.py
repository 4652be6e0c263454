"""Reverse-mode differentiation tape over the image primitive set.

Every primitive accepts plain numpy arrays or `Var` nodes. With plain inputs
it just computes; with at least one `Var` input it records a node, so the same
pipeline code serves both evaluation and gradient computation. A graph is
owned by a single thread; distinct graphs are independent.

Subgradient conventions: abs'(0) = 0, relu'(0) = 0, complex modulus gradient
at 0 = 0, sqrt'(0) = 0. clamp is straight-through. Division through
`safe_div` adds 1e-8 to the denominator.
"""

from __future__ import annotations

import numpy as np

from . import imgcore
from .errors import ContractError, ShapeError

SAFE_DIV_EPS = 1e-8


class Var:
    """A node on the tape: a value plus how to push gradients to its parents."""

    __slots__ = ("value", "_parents", "_vjp")

    def __init__(self, value, parents=(), vjp=None):
        self.value = np.asarray(value, dtype=float)
        self._parents = tuple(parents)
        self._vjp = vjp

    @property
    def shape(self):
        return self.value.shape

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __repr__(self):
        return f"Var(shape={self.value.shape})"


def value_of(x):
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=float)


def _unbroadcast(g, ref_value):
    if np.ndim(ref_value) == 0:
        return np.sum(g)
    return g


def _check_shapes(a, b):
    if np.ndim(a) != 0 and np.ndim(b) != 0 and np.shape(a) != np.shape(b):
        raise ShapeError(f"operand shapes differ: {np.shape(a)} vs {np.shape(b)}")


def _node(value, pairs):
    """pairs: list of (Var parent, function g -> grad contribution)."""
    parents = tuple(p for p, _ in pairs)
    fns = tuple(f for _, f in pairs)

    def vjp(g):
        return tuple(f(g) for f in fns)

    return Var(value, parents, vjp)


def _binary(a, b, fwd, da, db):
    av, bv = value_of(a), value_of(b)
    _check_shapes(av, bv)
    out = fwd(av, bv)
    if not (isinstance(a, Var) or isinstance(b, Var)):
        return out
    pairs = []
    if isinstance(a, Var):
        pairs.append((a, lambda g: _unbroadcast(da(g, av, bv), av)))
    if isinstance(b, Var):
        pairs.append((b, lambda g: _unbroadcast(db(g, av, bv), bv)))
    return _node(out, pairs)


def _unary(a, fwd, da):
    av = value_of(a)
    out = fwd(av)
    if not isinstance(a, Var):
        return out
    return _node(out, [(a, lambda g: da(g, av))])


# --- elementwise ------------------------------------------------------------

def add(a, b):
    return _binary(a, b, lambda x, y: x + y, lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b):
    return _binary(a, b, lambda x, y: x - y, lambda g, x, y: g, lambda g, x, y: -g)


def mul(a, b):
    return _binary(a, b, lambda x, y: x * y,
                   lambda g, x, y: g * y, lambda g, x, y: g * x)


def div(a, b):
    return _binary(a, b, lambda x, y: x / y,
                   lambda g, x, y: g / y, lambda g, x, y: -g * x / (y * y))


def safe_div(a, b, eps=SAFE_DIV_EPS):
    """a / (b + eps); stabilized division used by ratio-of-filter formulas."""
    return _binary(a, b, lambda x, y: x / (y + eps),
                   lambda g, x, y: g / (y + eps),
                   lambda g, x, y: -g * x / ((y + eps) ** 2))


def neg(a):
    return _unary(a, lambda x: -x, lambda g, x: -g)


def sin(a):
    return _unary(a, np.sin, lambda g, x: g * np.cos(x))


def cos(a):
    return _unary(a, np.cos, lambda g, x: -g * np.sin(x))


def exp(a):
    return _unary(a, np.exp, lambda g, x: g * np.exp(x))


def log(a):
    return _unary(a, np.log, lambda g, x: g / x)


def square(a):
    return _unary(a, np.square, lambda g, x: 2.0 * g * x)


def sqrt(a):
    def back(g, x):
        r = np.sqrt(x)
        return np.where(r > 0, g / (2.0 * np.maximum(r, 1e-300)), 0.0)

    return _unary(a, np.sqrt, back)


def absolute(a):
    return _unary(a, np.abs, lambda g, x: g * np.sign(x))


def relu(a):
    return _unary(a, lambda x: np.maximum(x, 0.0), lambda g, x: g * (x > 0))


def atan2(y, x):
    def dy(g, yv, xv):
        d = xv * xv + yv * yv
        return np.where(d > 0, g * xv / np.maximum(d, 1e-300), 0.0)

    def dx(g, yv, xv):
        d = xv * xv + yv * yv
        return np.where(d > 0, -g * yv / np.maximum(d, 1e-300), 0.0)

    return _binary(y, x, np.arctan2, dy, dx)


def deadzone(a, tol):
    """Snap |x| <= tol to exactly 0 (gradient passes through).

    Used ahead of atan2 so that numerically-flat filter responses resolve to
    the atan2(0, 0) = 0 convention instead of amplifying float noise.
    """
    return _unary(a, lambda x: np.where(np.abs(x) <= tol, 0.0, x), lambda g, x: g)


def mod_pi(a):
    """Reduce angles into [0, pi); gradient passes through (shift a.e.)."""
    return _unary(a, lambda x: np.mod(x, np.pi), lambda g, x: g)


def clamp(a, lo=0.0, hi=1.0):
    """Straight-through clamp: forward clips, gradient passes unchanged."""
    return _unary(a, lambda x: np.clip(x, lo, hi), lambda g, x: g)


def detach(a):
    """Cut the tape: downstream gradients do not reach `a`."""
    return np.array(value_of(a))


# --- reductions -------------------------------------------------------------

def vsum(a):
    return _unary(a, np.sum, lambda g, x: g * np.ones_like(x))


def vmean(a):
    return _unary(a, np.mean, lambda g, x: g * np.ones_like(x) / x.size)


def l1_norm(a):
    return _unary(a, lambda x: np.sum(np.abs(x)), lambda g, x: g * np.sign(x))


def l2_norm(a):
    def back(g, x):
        n = np.sqrt(np.sum(x * x))
        return g * x / n if n > 0 else np.zeros_like(x)

    return _unary(a, lambda x: np.sqrt(np.sum(x * x)), back)


# --- structural -------------------------------------------------------------

def conv2d(a, kernel, padding="replicate"):
    kernel = np.asarray(kernel, dtype=float)
    return _unary(a, lambda x: imgcore.conv2d(x, kernel, padding),
                  lambda g, x: imgcore.conv2d_adjoint(g, kernel, padding))


def to_luminance(a):
    def back(g, x):
        if x.ndim == 2:
            return g
        return g[:, :, None] * imgcore.LUMA_WEIGHTS[None, None, :]

    return _unary(a, imgcore.to_luminance, back)


def resize_bilinear(a, out_h, out_w):
    av = value_of(a)
    wr = imgcore.resize_weights(av.shape[0], out_h)
    wc = imgcore.resize_weights(av.shape[1], out_w)

    def back(g, x):
        if x.ndim == 2:
            return wr.T @ g @ wc
        return np.einsum("ij,ikc,kl->jlc", wr, g, wc)

    return _unary(a, lambda x: imgcore.resize_bilinear(x, out_h, out_w), back)


def crop(a, top, left, height, width):
    def back(g, x):
        out = np.zeros_like(x)
        out[top:top + height, left:left + width] = g
        return out

    return _unary(a, lambda x: x[top:top + height, left:left + width].copy(), back)


def stack(scalars):
    """Stack scalar values into a flat vector."""
    vals = np.array([float(value_of(s)) for s in scalars])
    if not any(isinstance(s, Var) for s in scalars):
        return vals
    pairs = [(s, (lambda i: lambda g: g[i])(i))
             for i, s in enumerate(scalars) if isinstance(s, Var)]
    return _node(vals, pairs)


# --- Fourier ----------------------------------------------------------------

def fft2(a):
    """2-D FFT of a real image, returned as a (real, imag) pair."""
    av = value_of(a)
    spec = np.fft.fft2(av)
    if not isinstance(a, Var):
        return spec.real, spec.imag
    n = av.size
    re = _node(spec.real, [(a, lambda g: np.real(np.fft.ifft2(g)) * n)])
    im = _node(spec.imag, [(a, lambda g: np.real(np.fft.ifft2(1j * g)) * n)])
    return re, im


def ifft2(re, im):
    """Inverse 2-D FFT of a complex pair, returned as a (real, imag) pair."""
    rv, iv = value_of(re), value_of(im)
    _check_shapes(rv, iv)
    out = np.fft.ifft2(rv + 1j * iv)
    if not (isinstance(re, Var) or isinstance(im, Var)):
        return out.real, out.imag
    n = rv.size

    def pairs_for(mult):
        # adjoint of the R^2-linear ifft, applied to g on one output leg
        res = []
        if isinstance(re, Var):
            res.append((re, lambda g: np.real(np.fft.fft2(mult * g)) / n))
        if isinstance(im, Var):
            res.append((im, lambda g: np.imag(np.fft.fft2(mult * g)) / n))
        return res

    ore = _node(out.real, pairs_for(1.0))
    oim = _node(out.imag, pairs_for(1j))
    return ore, oim


def complex_modulus(re, im):
    def make(which):
        def back(g, rv, iv):
            m = np.sqrt(rv * rv + iv * iv)
            comp = rv if which == 0 else iv
            return np.where(m > 0, g * comp / np.maximum(m, 1e-300), 0.0)

        return back

    return _binary(re, im, lambda r, i: np.sqrt(r * r + i * i),
                   make(0), make(1))


# --- backward ---------------------------------------------------------------

def _toposort(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss, wrt):
    """Gradient of a scalar `loss` Var w.r.t. one Var or a list of Vars."""
    if not isinstance(loss, Var):
        raise ContractError("backward needs a Var root")
    if loss.value.size != 1:
        raise ContractError(f"backward root must be scalar, got shape {loss.shape}")
    single = isinstance(wrt, Var)
    targets = [wrt] if single else list(wrt)
    keep = {id(t) for t in targets}
    grads = {id(loss): np.ones_like(loss.value)}
    for node in reversed(_toposort(loss)):
        g = grads.get(id(node))
        if g is None:
            continue
        if id(node) not in keep:
            del grads[id(node)]
        if node._vjp is None:
            continue
        for parent, pg in zip(node._parents, node._vjp(g)):
            acc = grads.get(id(parent))
            grads[id(parent)] = pg if acc is None else acc + pg
    out = [grads.get(id(t), np.zeros_like(t.value)) for t in targets]
    return out[0] if single else out


def finite_difference_check(f, x, h=1e-4, n_coords=50, rng=None):
    """Max relative error of backward() vs central differences at sampled coords.

    `f` must be a polymorphic scalar pipeline (Var in -> Var out, array in ->
    float out). Coordinates whose two-step central differences disagree are
    treated as non-differentiable (kinks) and excluded.
    """
    x = np.asarray(x, dtype=float)
    leaf = Var(x)
    loss = f(leaf)
    grad = backward(loss, leaf)
    rng = np.random.default_rng(0) if rng is None else rng
    flat = [np.unravel_index(i, x.shape)
            for i in rng.choice(x.size, size=min(n_coords, x.size), replace=False)]
    worst = 0.0
    for idx in flat:
        def fd(step):
            xp, xm = x.copy(), x.copy()
            xp[idx] += step
            xm[idx] -= step
            return (float(f(xp)) - float(f(xm))) / (2.0 * step)

        d1, d2 = fd(h), fd(2.0 * h)
        scale = max(abs(d1), abs(d2), 1e-8)
        if abs(d1 - d2) > 1e-3 * scale:
            continue  # kink or strongly curved: FD itself unreliable here
        a = float(grad[idx])
        err = abs(d1 - a) / max(abs(d1), abs(a), 1e-8)
        worst = max(worst, err)
    return worst
