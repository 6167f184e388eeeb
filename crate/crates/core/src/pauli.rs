//! Two-qubit Pauli product basis: decomposition, assembly, and the
//! `A_i(t)` / `B_i(t)` coefficient trajectories of the dilated Hamiltonian.

use std::io::Write;

use crate::error::{Error, Result};
use crate::io::{csv_error, csv_writer, flush_error, fmt_f64};
use crate::numkit::{pauli, ComplexMatrix, OperatorSeries, TimeGrid, C64};

pub const LABELS: [char; 4] = ['I', 'x', 'y', 'z'];

/// Default ceiling on `max|B| / max|A|` before [`extract_a_series`] warns.
pub const B_WARNING_RATIO: f64 = 1e-6;

/// Real coefficients of `Σ c[i][j] σ_i ⊗ σ_j`, system index first, order (I, x, y, z).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PauliCoeffs {
    pub c: [[f64; 4]; 4],
    /// Largest imaginary part met while decomposing (zero for assembled values).
    pub imag_residual: f64,
}

impl PauliCoeffs {
    pub fn get(&self, system: usize, ancilla: usize) -> f64 {
        self.c[system][ancilla]
    }

    /// Coefficients in a flat (I,x,y,z)² order.
    pub fn flat(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for i in 0..4 {
            for j in 0..4 {
                out[4 * i + j] = self.c[i][j];
            }
        }
        out
    }

    pub fn from_flat(values: [f64; 16]) -> Self {
        let mut c = [[0.0; 4]; 4];
        for (k, v) in values.into_iter().enumerate() {
            c[k / 4][k % 4] = v;
        }
        Self { c, imag_residual: 0.0 }
    }

    /// Builds `A1 σx⊗I + A2 I⊗σz + A3 σy⊗σz + A4 σz⊗σz`.
    pub fn from_a(a: [f64; 4]) -> Self {
        let mut c = [[0.0; 4]; 4];
        c[1][0] = a[0];
        c[0][3] = a[1];
        c[2][3] = a[2];
        c[3][3] = a[3];
        Self { c, imag_residual: 0.0 }
    }

    pub fn a(&self) -> [f64; 4] {
        [self.c[1][0], self.c[0][3], self.c[2][3], self.c[3][3]]
    }

    /// The coefficients that vanish for the PT family: (I⊗I, σy⊗I, σz⊗I, σx⊗σz).
    pub fn b(&self) -> [f64; 4] {
        [self.c[0][0], self.c[2][0], self.c[3][0], self.c[1][3]]
    }
}

fn product(i: usize, j: usize) -> ComplexMatrix {
    pauli(i).kron(&pauli(j))
}

/// `c[i][j] = Re Tr[(σ_i ⊗ σ_j) O] / 4`.
pub fn pauli_decompose(o: &ComplexMatrix, tol: f64) -> Result<PauliCoeffs> {
    if o.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: o.dim() });
    }
    let mut out = PauliCoeffs::default();
    for i in 0..4 {
        for j in 0..4 {
            let z: C64 = (&product(i, j) * o).trace() / 4.0;
            out.c[i][j] = z.re;
            out.imag_residual = out.imag_residual.max(z.im.abs());
        }
    }
    if out.imag_residual > tol {
        return Err(Error::NotHermitian { residual: out.imag_residual, tol });
    }
    Ok(out)
}

pub fn assemble(coeffs: &PauliCoeffs) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(4);
    for i in 0..4 {
        for j in 0..4 {
            if coeffs.c[i][j] != 0.0 {
                m += &product(i, j).scale(coeffs.c[i][j]);
            }
        }
    }
    m
}

/// `A_i(t)` and `B_i(t)` trajectories on a grid.
#[derive(Clone, Debug)]
pub struct ASeries {
    pub grid: TimeGrid,
    pub a: [Vec<f64>; 4],
    pub b: [Vec<f64>; 4],
    /// Largest coefficient outside the eight named ones, over the grid.
    pub other_max: f64,
}

impl ASeries {
    pub fn len(&self) -> usize {
        self.grid.n_nodes()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn a_at(&self, k: usize) -> [f64; 4] {
        [self.a[0][k], self.a[1][k], self.a[2][k], self.a[3][k]]
    }

    pub fn a_max(&self) -> f64 {
        self.a.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn b_max(&self) -> f64 {
        self.b.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `max|B| / max|A|`.
    pub fn b_ratio(&self) -> f64 {
        let a = self.a_max();
        if a == 0.0 {
            if self.b_max() == 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            self.b_max() / a
        }
    }

    pub fn check_b(&self, ratio_tol: f64) -> Result<()> {
        let ratio = self.b_ratio();
        if ratio > ratio_tol {
            Err(Error::BNonVanishing { ratio })
        } else {
            Ok(())
        }
    }

    /// CSV with header `t,A1,A2,A3,A4,B1,B2,B3,B4`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out);
        w.write_record(["t", "A1", "A2", "A3", "A4", "B1", "B2", "B3", "B4"]).map_err(csv_error)?;
        for (k, t) in self.grid.times().enumerate() {
            let mut row = vec![fmt_f64(t)];
            row.extend(self.a.iter().map(|s| fmt_f64(s[k])));
            row.extend(self.b.iter().map(|s| fmt_f64(s[k])));
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush().map_err(flush_error)?;
        Ok(())
    }
}

/// Decomposes every node of a 4x4 Hermitian series. Emits a warning when the
/// `B` coefficients exceed [`B_WARNING_RATIO`] of the `A` scale.
pub fn extract_a_series(hsa: &OperatorSeries) -> Result<ASeries> {
    let n = hsa.len();
    let mut a: [Vec<f64>; 4] = Default::default();
    let mut b: [Vec<f64>; 4] = Default::default();
    for s in a.iter_mut().chain(b.iter_mut()) {
        s.reserve(n);
    }
    let mut other_max = 0.0_f64;
    for op in &hsa.ops {
        let tol = 1e-9 * op.max_abs().max(1.0);
        let c = pauli_decompose(op, tol)?;
        for (dst, v) in a.iter_mut().zip(c.a()) {
            dst.push(v);
        }
        for (dst, v) in b.iter_mut().zip(c.b()) {
            dst.push(v);
        }
        for i in 0..4 {
            for j in 0..4 {
                let named = matches!((i, j), (1, 0) | (0, 3) | (2, 3) | (3, 3) | (0, 0) | (2, 0) | (3, 0) | (1, 3));
                if !named {
                    other_max = other_max.max(c.c[i][j].abs());
                }
            }
        }
    }
    let series = ASeries { grid: hsa.grid, a, b, other_max };
    if let Err(e) = series.check_b(B_WARNING_RATIO) {
        log::warn!("{e}");
    }
    Ok(series)
}
