"""Regularity indices and empirically calibrated constants."""


def M1(d: int) -> float:
    """Regularity index of the data norm: 1 in d = 1, 2 otherwise."""
    return 1.0 if d == 1 else 2.0


def M0(d: int) -> float:
    """Regularity index of the small ball where the transformations live."""
    return 1.0 if d == 1 else 1.5


# Radius of the m0-ball on which the fourth and fifth transformations are
# inverted by fixed point iteration.
BALL_RADIUS = 0.25

FIXED_POINT_TOL = 1e-13
FIXED_POINT_MAXITER = 50

# Radius (in ||w||_{m1}) of the ball where the fifth stage is inverted.  The
# contraction factor there was measured below 0.1 on random data.
PHI5_BALL = 0.2

# |S~_lambda - S_lambda| <= CISA_C ||u||_{m1}^2 S_lambda between (u, v) and its
# image under stages 3-5.  Sample maximum over 800 random states in d = 1, 2
# (decay exponents 1.5-5, ||u||_{m1} up to 0.1) was 1.11; frozen at ~2x.
CISA_C = 2.5

# |W_{>=7}(u,v)_k| <= W7_C ||u||_{m1}^6 (|u_k| + |u_{-k}|).  Sample maximum 1.92
# over 90 random states (d = 1, 2; ||u||_{m1} in [0.005, 0.03]).
W7_C = 4.0

# |g(j,l,k)| <= COEF_C |j|^2 |l|^2 (d = 1) and <= COEF_C (|j|^4 |l|^2 + |j|^2 |l|^4)
# (d >= 2) for every fifth-stage coefficient g.  Grid maxima: 0.19 (d = 1,
# radii <= 40) and 0.75 (d = 2, keys <= 200).
COEF_C = 1.0
