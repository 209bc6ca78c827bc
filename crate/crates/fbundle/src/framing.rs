//! Framing trivializations, good bases, and extension of a framed
//! (T)-structure to an F-bundle from a u-direction initial condition.

use crate::connection::{FBundle, TStructure};
use crate::error::{Error, Result};
use crate::matrix::ScalarMatrix;
use crate::series::{Series, SeriesMatrix, TruncOrder};

/// Invertible gauge with P(0, u) = Id; the inverse is cached.
#[derive(Clone)]
pub struct Gauge {
    pub p: SeriesMatrix,
    pub p_inv: SeriesMatrix,
}

impl Gauge {
    pub fn identity(t: &TStructure) -> Gauge {
        let syms = t.spec.symbols();
        let id = SeriesMatrix::identity(t.vars(), t.order(), t.rank(), syms);
        Gauge {
            p: id.clone(),
            p_inv: id,
        }
    }

    pub fn from_matrix(t: &TStructure, p: SeriesMatrix) -> Result<Gauge> {
        let p_inv = p.inverse_unipotent(t.spec.symbols())?;
        Ok(Gauge { p, p_inv })
    }

    /// Gauge a base-direction matrix: Ã = uP⁻¹∂ᵢP + P⁻¹AᵢP.
    pub fn apply_t(&self, a: &SeriesMatrix, dir: usize) -> Result<SeriesMatrix> {
        let d = self.p_inv.mul(&self.p.diff_var(dir))?.mul_u_power(1)?;
        Ok(d.add(&self.p_inv.mul(a)?.mul(&self.p)?))
    }

    /// Gauge the u-direction matrix: Ũ = u²P⁻¹∂ᵤP + P⁻¹UP.
    pub fn apply_u(&self, u_mat: &SeriesMatrix) -> Result<SeriesMatrix> {
        let d = self.p_inv.mul(&self.p.diff_u()?)?.mul_u_power(2)?;
        Ok(d.add(&self.p_inv.mul(u_mat)?.mul(&self.p)?))
    }
}

/// All exponent vectors of total degree `d` in `nvars` variables,
/// lexicographically ordered.
pub(crate) fn monomials_of_degree(nvars: usize, d: u32) -> Vec<Vec<u16>> {
    let mut out = Vec::new();
    let mut cur = vec![0u16; nvars];
    fn rec(out: &mut Vec<Vec<u16>>, cur: &mut Vec<u16>, pos: usize, rem: u16) {
        if pos + 1 == cur.len() {
            cur[pos] = rem;
            out.push(cur.clone());
            return;
        }
        for v in (0..=rem).rev() {
            cur[pos] = v;
            rec(out, cur, pos + 1, rem - v);
        }
    }
    if nvars == 0 {
        if d == 0 {
            out.push(vec![]);
        }
        return out;
    }
    rec(&mut out, &mut cur, 0, d as u16);
    out
}

/// Compute the unique framing gauge P with P(0,u) = Id for a flat
/// (T)-structure, solving ∂P/∂tᵢ = u⁻¹(−TᵢP + P·P₀⁻¹Tᵢ(·,0)P₀) total degree
/// by total degree, and return it with the framed structure (whose matrices
/// are the u-free P₀⁻¹Tᵢ(·,0)P₀).
pub fn compute_framing(t: &TStructure) -> Result<(Gauge, TStructure)> {
    let syms = t.spec.symbols().clone();
    let vars = t.vars().clone();
    let order = t.order();
    let n = t.rank();
    let d_t = order.t_cap;

    if t.is_framed() {
        let framed = t.clone();
        return Ok((Gauge::identity(t), framed));
    }

    // Working window: u-degrees can grow by u_max(T) per t-degree.
    let work = TruncOrder {
        t_cap: d_t,
        u_min: order.u_min.min(0),
        u_max: order.u_max.max(0) * (d_t as i32 + 1) + 2,
    };
    let mats: Vec<SeriesMatrix> = t
        .mats()
        .iter()
        .map(|m| m.truncate(work))
        .collect::<Result<_>>()?;
    let t0_mats: Vec<SeriesMatrix> = mats.iter().map(|m| m.map(|e| e.u_coefficient(0))).collect();

    let mut p = SeriesMatrix::identity(&vars, work, n, &syms);
    for d in 1..=d_t {
        // Data known to degree d-1 suffices for the degree-d coefficients.
        let low = TruncOrder {
            t_cap: d - 1,
            ..work
        };
        let p_low = p.truncate(low)?;
        let p0 = p_low.map(|e| e.u_coefficient(0));
        let p0_inv = p0.inverse_unipotent(&syms)?;
        let framed_now: Vec<SeriesMatrix> = t0_mats
            .iter()
            .map(|m| p0_inv.mul(&m.truncate(low)?)?.mul(&p0))
            .collect::<Result<_>>()?;
        let rhs: Vec<SeriesMatrix> = (0..vars.len())
            .map(|i| {
                let ti = mats[i].truncate(low)?;
                Ok(ti.mul(&p_low)?.neg().add(&p_low.mul(&framed_now[i])?))
            })
            .collect::<Result<_>>()?;
        for alpha in monomials_of_degree(vars.len(), d) {
            let i = alpha.iter().position(|&a| a > 0).expect("degree >= 1");
            let mut beta = alpha.clone();
            beta[i] -= 1;
            let f = rhs[i].mono_coeff(&beta);
            let coeff = f.exact_div_u()?.mul_scalar(
                &crate::scalar::Scalar::from_i64(&syms, alpha[i] as i64)
                    .inv()
                    .expect("positive integer"),
            );
            p.add_mono_times(&alpha, &coeff)?;
        }
    }

    let p0 = p.map(|e| e.u_coefficient(0));
    let p0_inv = p0.inverse_unipotent(&syms)?;
    let framed_mats: Vec<SeriesMatrix> = t0_mats
        .iter()
        .map(|m| p0_inv.mul(m)?.mul(&p0)?.truncate(order))
        .collect::<Result<_>>()?;
    let framed = TStructure::new(t.spec.clone(), vars.clone(), framed_mats)?;
    let gauge = Gauge::from_matrix(t, p)?;
    Ok((gauge, framed))
}

/// The unique good basis restricting to the given fiber basis, as columns in
/// the ambient trivialization (framing gauge applied to constant sections
/// after the basis change).
pub fn extend_good_basis(t: &TStructure, fiber_basis: &ScalarMatrix) -> Result<Vec<Vec<Series>>> {
    if !fiber_basis.is_square() || fiber_basis.rows() != t.rank() {
        return Err(Error::DimensionMismatch("fiber basis size".into()));
    }
    if fiber_basis.rank() != t.rank() {
        return Err(Error::SingularFiberBasis);
    }
    let (gauge, _) = compute_framing(t)?;
    let vars = t.vars().clone();
    let order = gauge.p.order();
    let c = SeriesMatrix::from_scalar_matrix(fiber_basis, &vars, order)?;
    let pc = gauge.p.mul(&c)?;
    Ok((0..t.rank())
        .map(|j| (0..t.rank()).map(|i| pc[(i, j)].clone()).collect())
        .collect())
}

/// Extend a framed (T)-structure to the unique F-bundle with
/// U(0, u) = `u0`, solving ∂U/∂tᵢ = −Tᵢ [+ λ∂λTᵢ] + u⁻¹[U, Tᵢ] degree by
/// degree. `u0` must be free of the base variables.
pub fn extend_u_direction(
    t: &TStructure,
    u0: &SeriesMatrix,
    lambda_euler: bool,
) -> Result<FBundle> {
    if let Some(dir) = t.unframed_direction() {
        return Err(Error::NotFramed(dir.to_string()));
    }
    let syms = t.spec.symbols().clone();
    let vars = t.vars().clone();
    let order = t.order();

    if u0.max_t_degree() > 0 {
        return Err(Error::Invalid(
            "u-direction initial condition must not involve the base variables".into(),
        ));
    }
    let mut u = u0.try_map(|e| e.retarget_t_free(&vars, order))?;
    for d in 1..=order.t_cap {
        // Coefficients of t-degree d only need data to degree d-1.
        let low = TruncOrder {
            t_cap: d - 1,
            ..order
        };
        let u_low = u.truncate(low)?;
        let rhs: Vec<SeriesMatrix> = (0..vars.len())
            .map(|i| {
                let ti = t.mat(i).truncate(low)?;
                let mut r = ti.neg();
                if lambda_euler {
                    r = r.add(&ti.lambda_euler(&t.spec));
                }
                let br = u_low.commutator(&ti)?;
                Ok(r.add(&br.exact_div_u()?))
            })
            .collect::<Result<_>>()?;
        for alpha in monomials_of_degree(vars.len(), d) {
            let i = alpha.iter().position(|&a| a > 0).expect("degree >= 1");
            let mut beta = alpha.clone();
            beta[i] -= 1;
            let coeff = rhs[i].mono_coeff(&beta).mul_scalar(
                &crate::scalar::Scalar::from_i64(&syms, alpha[i] as i64)
                    .inv()
                    .expect("positive integer"),
            );
            u.add_mono_times(&alpha, &coeff)?;
        }
    }
    Ok(FBundle::new(t.clone(), u)?.with_lambda_euler(lambda_euler))
}

/// Whether a (T)-framing gauge of the underlying structure is a framing for
/// the whole F-bundle: the gauged U must have u-degree ≤ 1 at t = 0.
pub fn is_f_framing(b: &FBundle, g: &Gauge) -> Result<bool> {
    for i in 0..b.t.n_vars() {
        let gauged = g.apply_t(b.t.mat(i), i)?;
        if !gauged.is_u_free() {
            return Err(Error::NotFramed(b.t.vars().name(i).to_string()));
        }
    }
    let gauged_u = g.apply_u(&b.u_mat)?.eval_t0();
    Ok(gauged_u
        .max_u_degree()
        .map(|d| d <= 1)
        .unwrap_or(true))
}
