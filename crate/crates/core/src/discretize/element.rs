//! Element integrals for cubic Hermite (displacement) and linear (temperature)
//! shape functions. Every bilinear form is a polynomial of degree ≤ 6 on an
//! element, so 4-point Gauss–Legendre integrates it exactly.

const GAUSS_POINTS: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

/// Quadrature on `[0, h]`: pairs `(s, w)` with `s ∈ [0, 1]` the local
/// coordinate and `w` the physical weight.
fn quadrature(h: f64) -> impl Iterator<Item = (f64, f64)> {
    GAUSS_POINTS
        .iter()
        .zip(GAUSS_WEIGHTS.iter())
        .map(move |(&xi, &w)| (0.5 * (xi + 1.0), 0.5 * w * h))
}

/// Hermite basis `(u_i, u'_i, u_j, u'_j)` and its x-derivatives at local `s`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Hermite {
    pub value: [f64; 4],
    pub slope: [f64; 4],
    pub curvature: [f64; 4],
}

impl Hermite {
    pub fn at(s: f64, h: f64) -> Self {
        let s2 = s * s;
        let s3 = s2 * s;
        Self {
            value: [
                1.0 - 3.0 * s2 + 2.0 * s3,
                h * (s - 2.0 * s2 + s3),
                3.0 * s2 - 2.0 * s3,
                h * (s3 - s2),
            ],
            slope: [
                (6.0 * s2 - 6.0 * s) / h,
                1.0 - 4.0 * s + 3.0 * s2,
                (6.0 * s - 6.0 * s2) / h,
                3.0 * s2 - 2.0 * s,
            ],
            curvature: [
                (12.0 * s - 6.0) / (h * h),
                (6.0 * s - 4.0) / h,
                (6.0 - 12.0 * s) / (h * h),
                (6.0 * s - 2.0) / h,
            ],
        }
    }
}

/// Linear hats `(ψ_i, ψ_j)` and their x-derivatives at local `s`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Linear {
    pub value: [f64; 2],
    pub slope: [f64; 2],
}

impl Linear {
    pub fn at(s: f64, h: f64) -> Self {
        Self {
            value: [1.0 - s, s],
            slope: [-1.0 / h, 1.0 / h],
        }
    }
}

/// All element matrices of one element of length `h` (unit coefficients).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ElementMatrices {
    /// `∫ N_a N_b`
    pub mass: [[f64; 4]; 4],
    /// `∫ N_a'' N_b''`
    pub bending: [[f64; 4]; 4],
    /// `∫ N_a' N_b'`
    pub shear: [[f64; 4]; 4],
    /// `∫ ψ_a ψ_b`
    pub thermal_mass: [[f64; 2]; 2],
    /// `∫ ψ_a' ψ_b'`
    pub conduction: [[f64; 2]; 2],
    /// `∫ N_a'' ψ_b`
    pub curvature_coupling: [[f64; 2]; 4],
    /// `∫ N_a ψ_b'`
    pub slope_coupling: [[f64; 2]; 4],
}

impl ElementMatrices {
    pub fn new(h: f64) -> Self {
        let mut out = ElementMatrices {
            mass: [[0.0; 4]; 4],
            bending: [[0.0; 4]; 4],
            shear: [[0.0; 4]; 4],
            thermal_mass: [[0.0; 2]; 2],
            conduction: [[0.0; 2]; 2],
            curvature_coupling: [[0.0; 2]; 4],
            slope_coupling: [[0.0; 2]; 4],
        };
        for (s, w) in quadrature(h) {
            let n = Hermite::at(s, h);
            let t = Linear::at(s, h);
            for a in 0..4 {
                for b in a..4 {
                    out.mass[a][b] += w * (n.value[a] * n.value[b]);
                    out.bending[a][b] += w * (n.curvature[a] * n.curvature[b]);
                    out.shear[a][b] += w * (n.slope[a] * n.slope[b]);
                }
                for b in 0..2 {
                    out.curvature_coupling[a][b] += w * n.curvature[a] * t.value[b];
                    out.slope_coupling[a][b] += w * n.value[a] * t.slope[b];
                }
            }
            for a in 0..2 {
                for b in a..2 {
                    out.thermal_mass[a][b] += w * (t.value[a] * t.value[b]);
                    out.conduction[a][b] += w * (t.slope[a] * t.slope[b]);
                }
            }
        }
        // Mirror the upper triangles so the global forms are bitwise symmetric.
        for a in 0..4 {
            for b in 0..a {
                out.mass[a][b] = out.mass[b][a];
                out.bending[a][b] = out.bending[b][a];
                out.shear[a][b] = out.shear[b][a];
            }
        }
        out.thermal_mass[1][0] = out.thermal_mass[0][1];
        out.conduction[1][0] = out.conduction[0][1];
        out
    }
}
