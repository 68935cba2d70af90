"""Dormand-Prince 5(4) stepping for the complex first-order system

    f' = r(x) g,    g' = -z w(x) f,

with g the quasi-derivative.  Plain Python complex scalars: the system has
two components, so array overhead would dominate.
"""
import math

# Butcher tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40

BIG = 1e100


class StepLimitError(RuntimeError):
    pass


class Result:
    __slots__ = ("f", "g", "lnscale", "energy", "steps", "rejected")

    def __init__(self, f, g, lnscale, energy, steps, rejected):
        self.f, self.g, self.lnscale = f, g, lnscale
        self.energy, self.steps, self.rejected = energy, steps, rejected


def integrate(w, r, z, x0, x1, f, g, rtol=1e-9, atol=1e-12, h0=None, max_steps=200000,
              energy=False, wsign=1.0):
    """Carry (f, g) from x0 to x1 (either direction).

    Returns a Result whose (f, g) must be multiplied by exp(lnscale) to get
    the true state.  With energy=True the integral of wsign * w |f|^2 along
    the path is accumulated in the same (rescaled) units squared.
    """
    span = x1 - x0
    if span == 0:
        return Result(f, g, 0.0, 0.0, 0, 0)
    direction = 1.0 if span > 0 else -1.0
    h = abs(h0) if h0 else 1e-3 * abs(span)
    h = min(h, abs(span)) * direction
    x = x0
    lnscale = 0.0
    E = 0.0
    wx = w(x)
    k1f = r(x) * g
    k1g = -z * wx * f
    e1 = wx * (f.real * f.real + f.imag * f.imag) if energy else 0.0
    steps = rejected = 0
    while True:
        if steps + rejected > max_steps:
            raise StepLimitError(f"step limit reached at x={x}")
        rest = x1 - x
        last = False
        if abs(h) >= abs(rest):
            h = rest
            last = True
        xa = x + C2 * h
        f2 = f + h * A21 * k1f
        g2 = g + h * A21 * k1g
        w2 = w(xa)
        k2f = r(xa) * g2
        k2g = -z * w2 * f2
        xa = x + C3 * h
        f3 = f + h * (A31 * k1f + A32 * k2f)
        g3 = g + h * (A31 * k1g + A32 * k2g)
        w3 = w(xa)
        k3f = r(xa) * g3
        k3g = -z * w3 * f3
        xa = x + C4 * h
        f4 = f + h * (A41 * k1f + A42 * k2f + A43 * k3f)
        g4 = g + h * (A41 * k1g + A42 * k2g + A43 * k3g)
        w4 = w(xa)
        k4f = r(xa) * g4
        k4g = -z * w4 * f4
        xa = x + C5 * h
        f5 = f + h * (A51 * k1f + A52 * k2f + A53 * k3f + A54 * k4f)
        g5 = g + h * (A51 * k1g + A52 * k2g + A53 * k3g + A54 * k4g)
        w5 = w(xa)
        k5f = r(xa) * g5
        k5g = -z * w5 * f5
        xa = x1 if last else x + h
        f6 = f + h * (A61 * k1f + A62 * k2f + A63 * k3f + A64 * k4f + A65 * k5f)
        g6 = g + h * (A61 * k1g + A62 * k2g + A63 * k3g + A64 * k4g + A65 * k5g)
        w6 = w(xa)
        k6f = r(xa) * g6
        k6g = -z * w6 * f6
        fn = f + h * (B1 * k1f + B3 * k3f + B4 * k4f + B5 * k5f + B6 * k6f)
        gn = g + h * (B1 * k1g + B3 * k3g + B4 * k4g + B5 * k5g + B6 * k6g)
        k7f = r(xa) * gn
        k7g = -z * w6 * fn
        ef = h * (E1 * k1f + E3 * k3f + E4 * k4f + E5 * k5f + E6 * k6f + E7 * k7f)
        eg = h * (E1 * k1g + E3 * k3g + E4 * k4g + E5 * k5g + E6 * k6g + E7 * k7g)
        af, ag, afn, agn = abs(f), abs(g), abs(fn), abs(gn)
        norm = max(af, ag, afn, agn)
        sf = atol * norm + rtol * max(af, afn)
        sg = atol * norm + rtol * max(ag, agn)
        err = max(abs(ef) / sf if sf > 0 else 0.0, abs(eg) / sg if sg > 0 else 0.0)
        if not math.isfinite(err):
            h *= 0.2
            rejected += 1
            continue
        if err <= 1.0:
            if energy:
                # 5th-order weights on w|f|^2 at the stage points
                q = lambda v: v.real * v.real + v.imag * v.imag
                e3 = w3 * q(f3)
                e4 = w4 * q(f4)
                e5 = w5 * q(f5)
                e6 = w6 * q(f6)
                E += wsign * h * (B1 * e1 + B3 * e3 + B4 * e4 + B5 * e5 + B6 * e6) * direction
                e1 = w6 * q(fn)
            x = xa
            f, g = fn, gn
            k1f, k1g = k7f, k7g
            steps += 1
            big = max(afn, agn)
            if big > BIG or (0 < big < 1 / BIG):
                f /= big
                g /= big
                k1f /= big
                k1g /= big
                E /= big * big
                e1 /= big * big
                lnscale += math.log(big)
            if last:
                return Result(f, g, lnscale, E, steps, rejected)
            fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h *= fac
        else:
            h *= max(0.2, 0.9 * err ** -0.2)
            rejected += 1
            if abs(h) < 1e-15 * max(abs(x), 1e-300):
                raise StepLimitError(f"step size underflow at x={x}")
