//! Gauss-Legendre quadrature nodes and weights on [-1, 1].

// tabulated values keep their conventional printed digits
#![allow(clippy::excessive_precision)]

/// Nodes and weights for the given order (1..=8, clamped).
pub fn gauss_legendre(order: usize) -> (&'static [f64], &'static [f64]) {
    match order.clamp(1, 8) {
        1 => (&N1, &W1),
        2 => (&N2, &W2),
        3 => (&N3, &W3),
        4 => (&N4, &W4),
        5 => (&N5, &W5),
        6 => (&N6, &W6),
        7 => (&N7, &W7),
        _ => (&N8, &W8),
    }
}

static N1: [f64; 1] = [0.0];
static W1: [f64; 1] = [2.0];

static N2: [f64; 2] = [-0.5773502691896257, 0.5773502691896257];
static W2: [f64; 2] = [1.0, 1.0];

static N3: [f64; 3] = [-0.7745966692414834, 0.0, 0.7745966692414834];
static W3: [f64; 3] = [
    0.5555555555555556,
    0.8888888888888888,
    0.5555555555555556,
];

static N4: [f64; 4] = [
    -0.8611363115940526,
    -0.3399810435848563,
    0.3399810435848563,
    0.8611363115940526,
];
static W4: [f64; 4] = [
    0.34785484513745385,
    0.6521451548625461,
    0.6521451548625461,
    0.34785484513745385,
];

static N5: [f64; 5] = [
    -0.906179845938664,
    -0.5384693101056831,
    0.0,
    0.5384693101056831,
    0.906179845938664,
];
static W5: [f64; 5] = [
    0.23692688505618908,
    0.47862867049936647,
    0.5688888888888889,
    0.47862867049936647,
    0.23692688505618908,
];

static N6: [f64; 6] = [
    -0.9324695142031521,
    -0.6612093864662645,
    -0.2386191860831969,
    0.2386191860831969,
    0.6612093864662645,
    0.9324695142031521,
];
static W6: [f64; 6] = [
    0.17132449237917036,
    0.3607615730481386,
    0.46791393457269104,
    0.46791393457269104,
    0.3607615730481386,
    0.17132449237917036,
];

static N7: [f64; 7] = [
    -0.9491079123427585,
    -0.7415311855993945,
    -0.4058451513773972,
    0.0,
    0.4058451513773972,
    0.7415311855993945,
    0.9491079123427585,
];
static W7: [f64; 7] = [
    0.1294849661688697,
    0.27970539148927664,
    0.3818300505051189,
    0.4179591836734694,
    0.3818300505051189,
    0.27970539148927664,
    0.1294849661688697,
];

static N8: [f64; 8] = [
    -0.9602898564975363,
    -0.7966664774136267,
    -0.525532409916329,
    -0.1834346424956498,
    0.1834346424956498,
    0.525532409916329,
    0.7966664774136267,
    0.9602898564975363,
];
static W8: [f64; 8] = [
    0.10122853629037626,
    0.22238103445337448,
    0.31370664587788727,
    0.362683783378362,
    0.362683783378362,
    0.31370664587788727,
    0.22238103445337448,
    0.10122853629037626,
];
