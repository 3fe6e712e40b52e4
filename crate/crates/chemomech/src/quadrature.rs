//! Gauss-Legendre quadrature and Lagrange shape functions on the reference
//! element [-1, 1], plus the precomputed tables the assembly loops consume.

/// Quadrature points and weights on [-1, 1].
#[derive(Clone, Debug)]
pub struct QuadRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Legendre P_n(x) and its derivative by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 1..n {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = p_next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// n-point Gauss-Legendre rule, exact for polynomials of degree 2n - 1.
/// Nodes are Newton-refined from the Chebyshev-like initial guess.
pub fn gauss_legendre(n: usize) -> QuadRule {
    assert!(n >= 1);
    if n == 1 {
        return QuadRule {
            points: vec![0.0],
            weights: vec![2.0],
        };
    }
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        // Guess ordering is descending in x; store ascending.
        points[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    QuadRule { points, weights }
}

/// Equispaced Lagrange nodes of order p on [-1, 1].
pub fn lagrange_nodes(p: usize) -> Vec<f64> {
    assert!(p >= 1);
    (0..=p).map(|a| -1.0 + 2.0 * a as f64 / p as f64).collect()
}

/// Values and xi-derivatives of the p + 1 Lagrange basis functions at xi.
pub fn lagrange_shape(p: usize, xi: f64) -> (Vec<f64>, Vec<f64>) {
    let nodes = lagrange_nodes(p);
    let n = p + 1;
    let mut values = vec![0.0; n];
    let mut derivs = vec![0.0; n];
    for a in 0..n {
        let mut val = 1.0;
        for b in 0..n {
            if b != a {
                val *= (xi - nodes[b]) / (nodes[a] - nodes[b]);
            }
        }
        values[a] = val;
        let mut der = 0.0;
        for c in 0..n {
            if c == a {
                continue;
            }
            let mut term = 1.0 / (nodes[a] - nodes[c]);
            for b in 0..n {
                if b != a && b != c {
                    term *= (xi - nodes[b]) / (nodes[a] - nodes[b]);
                }
            }
            der += term;
        }
        derivs[a] = der;
    }
    (values, derivs)
}

/// Shape-function values and derivatives tabulated at the quadrature points
/// of one reference element: `n[q][a]`, `dn[q][a]`.
#[derive(Clone, Debug)]
pub struct ShapeTable {
    pub p: usize,
    pub rule: QuadRule,
    pub n: Vec<Vec<f64>>,
    pub dn: Vec<Vec<f64>>,
}

impl ShapeTable {
    pub fn new(p: usize, nq: usize) -> Self {
        let rule = gauss_legendre(nq);
        let mut n = Vec::with_capacity(nq);
        let mut dn = Vec::with_capacity(nq);
        for &xi in &rule.points {
            let (values, derivs) = lagrange_shape(p, xi);
            n.push(values);
            dn.push(derivs);
        }
        ShapeTable { p, rule, n, dn }
    }

    pub fn nq(&self) -> usize {
        self.rule.points.len()
    }
}
