//! The ℂP¹ B-model: rank-2 module with basis `[Ω], [zΩ]` over the mirror
//! torus, superpotential W = z + q·e^{y₁}/z (+ y₂ after unfolding), and all
//! operations computed through the two-term reduction rule
//! `[z^{m+1}Ω] = (λ − u·m)[z^mΩ] + q·e^{y₁}[z^{m−1}Ω]`.

use std::sync::Arc;

use crate::connection::{check_flatness, Bundle, FBundle, TStructure};
use crate::equivariant::{assemble_equivariant, lift_t_structure, EquivFBundle};
use crate::error::{Error, Result};
use crate::instances::{standard_grading, QhP1};
use crate::scalar::Scalar;
use crate::series::{Series, SeriesMatrix, TruncOrder, VarSet};
use crate::symbols::ParamSpec;

/// Reduction engine for the rank-2 lattice with the z-exponent window
/// auto-sized from the truncation order.
pub struct BrieskornP1 {
    pub spec: ParamSpec,
    vars: Arc<VarSet>,
    order: TruncOrder,
    window: i64,
    q_tilde: Series,
    q_tilde_inv: Series,
}

impl BrieskornP1 {
    /// `vars` must contain `y1` (the divisor direction); `y2`, when present,
    /// is the unfolding direction with superpotential term y₂·1.
    pub fn new(spec: &ParamSpec, vars: &Arc<VarSet>, order: TruncOrder) -> Result<Self> {
        let syms = spec.symbols();
        let y1 = vars
            .index_of("y1")
            .ok_or_else(|| Error::UnknownVariable("y1".into()))?;
        let q = Scalar::symbol(syms, 0);
        let q_tilde = Series::exp_var(vars, order, y1, syms).mul_scalar(&q);
        // e^{-y1}/q inverts q·e^{y1} exactly at the truncation order.
        let minus_one = Scalar::from_i64(syms, -1);
        let q_tilde_inv =
            Series::exp_var_scaled(vars, order, y1, &minus_one).mul_scalar(&q.inv()?);
        Ok(BrieskornP1 {
            spec: spec.clone(),
            vars: vars.clone(),
            order,
            window: order.t_cap as i64 + 2,
            q_tilde,
            q_tilde_inv,
        })
    }

    pub fn window(&self) -> i64 {
        self.window
    }

    fn lambda(&self) -> Scalar {
        Scalar::symbol(self.spec.symbols(), 1)
    }

    /// λ − u·m as a series.
    fn lambda_minus_um(&self, m: i64) -> Series {
        let syms = self.spec.symbols();
        let l = Series::constant(&self.vars, self.order, self.lambda());
        let um = Series::u_power(&self.vars, self.order, 1, syms).mul_i64(m);
        l.sub(&um)
    }

    /// Express `[z^m Ω]` in the basis `([Ω], [zΩ])`.
    pub fn reduce_z_power(&self, m: i64) -> Result<(Series, Series)> {
        if m.abs() > self.window {
            return Err(Error::ReductionWindowExceeded {
                needed: m,
                lo: -self.window,
                hi: self.window,
            });
        }
        let syms = self.spec.symbols();
        match m {
            0 => Ok((
                Series::one(&self.vars, self.order, syms),
                Series::zero(&self.vars, self.order, syms),
            )),
            1 => Ok((
                Series::zero(&self.vars, self.order, syms),
                Series::one(&self.vars, self.order, syms),
            )),
            m if m >= 2 => {
                let (a1, b1) = self.reduce_z_power(m - 1)?;
                let (a2, b2) = self.reduce_z_power(m - 2)?;
                let c = self.lambda_minus_um(m - 1);
                Ok((
                    c.mul(&a1)?.add(&self.q_tilde.mul(&a2)?),
                    c.mul(&b1)?.add(&self.q_tilde.mul(&b2)?),
                ))
            }
            m => {
                // Upward: [z^m] = q̃⁻¹([z^{m+2}] − (λ − u(m+1))[z^{m+1}]).
                let (a2, b2) = self.reduce_z_power(m + 2)?;
                let (a1, b1) = self.reduce_z_power(m + 1)?;
                let c = self.lambda_minus_um(m + 1);
                Ok((
                    self.q_tilde_inv.mul(&a2.sub(&c.mul(&a1)?))?,
                    self.q_tilde_inv.mul(&b2.sub(&c.mul(&b1)?))?,
                ))
            }
        }
    }

    /// Matrix of multiplication by z^p in the basis `([Ω], [zΩ])`.
    pub fn z_power_mult_matrix(&self, p: i64) -> Result<SeriesMatrix> {
        let c0 = self.reduce_z_power(p)?;
        let c1 = self.reduce_z_power(p + 1)?;
        let mut m = SeriesMatrix::zero(&self.vars, self.order, 2, self.spec.symbols());
        m[(0, 0)] = c0.0;
        m[(1, 0)] = c0.1;
        m[(0, 1)] = c1.0;
        m[(1, 1)] = c1.1;
        Ok(m)
    }

    /// Matrix of multiplication by ∂W/∂y₁ = q̃/z.
    pub fn divisor_direction_matrix(&self) -> Result<SeriesMatrix> {
        self.z_power_mult_matrix(-1)?.try_map(|s| self.q_tilde.mul(s))
    }

    /// Matrix of multiplication by W̃ = z + q̃/z + y₂ (the y₂ term only when
    /// the variable exists).
    pub fn w_mult_matrix(&self) -> Result<SeriesMatrix> {
        let syms = self.spec.symbols();
        let mut m = self
            .z_power_mult_matrix(1)?
            .add(&self.divisor_direction_matrix()?);
        if let Some(y2) = self.vars.index_of("y2") {
            let y2s = Series::var(&self.vars, self.order, y2, syms);
            m = m.add(
                &SeriesMatrix::identity(&self.vars, self.order, 2, syms).mul_series(&y2s)?,
            );
        }
        Ok(m)
    }

    pub fn q_tilde(&self) -> &Series {
        &self.q_tilde
    }
}

pub struct P1BModel {
    pub equiv: EquivFBundle,
    pub brieskorn: BrieskornP1,
    pub qh: QhP1,
}

fn build_b_model(vars: Vec<String>, d_t: u32, lambda_cap: u32, u_max: i32) -> Result<P1BModel> {
    let qh = QhP1::new();
    let spec = qh.spec.clone();
    let syms = spec.symbols().clone();
    let order = TruncOrder::new(d_t, -2, u_max);
    let unfolded = vars.iter().any(|v| v == "y2");
    let vars = VarSet::new(vars);
    let br = BrieskornP1::new(&spec, &vars, order)?;

    let mut mats = vec![br.divisor_direction_matrix()?];
    let mut dirs = vec![(1i64, 2i64)];
    if unfolded {
        mats.push(SeriesMatrix::identity(&vars, order, 2, &syms));
        dirs.push((0, 0));
    }
    let r_tstruct = TStructure::new(spec.clone(), vars, mats)?;
    let r_grading = standard_grading(&spec, &[0, 1], &dirs, None);

    let lifted = lift_t_structure(&r_tstruct, lambda_cap)?;
    let k_grading = standard_grading(&spec, &[0, 1], &dirs, Some(lambda_cap));
    let u = k_grading.u_matrix(&lifted)?;
    let k_bundle = FBundle::new(lifted, u)?.with_lambda_euler(true);
    debug_assert!(check_flatness(&Bundle::F(k_bundle.clone()))?.flat);
    let mut equiv = assemble_equivariant(k_bundle, r_tstruct, lambda_cap)?;
    equiv.k_grading = Some(k_grading);
    equiv.r_grading = Some(r_grading);
    Ok(P1BModel {
        equiv,
        brieskorn: br,
        qh,
    })
}

/// The small model over y₁ with W = z + q·e^{y₁}/z.
pub fn p1_b_model(d_t: u32, lambda_cap: u32, u_max: i32) -> Result<P1BModel> {
    build_b_model(vec!["y1".into()], d_t, lambda_cap, u_max)
}

/// The unfolded model over (y₁, y₂) with W̃ = W + y₂·1: the identity class
/// is the canonical lift of the missing basis direction.
pub fn unfolded_p1_b_model(d_t: u32, lambda_cap: u32, u_max: i32) -> Result<P1BModel> {
    build_b_model(vec!["y1".into(), "y2".into()], d_t, lambda_cap, u_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::check_maximal;

    fn small() -> P1BModel {
        p1_b_model(3, 1, 4).unwrap()
    }

    #[test]
    fn printed_reduction_at_m_zero() {
        // [zΩ] = λ[Ω] + q̃[z⁻¹Ω], i.e. q̃[z⁻¹Ω] = [zΩ] − λ[Ω].
        let b = small();
        let br = &b.brieskorn;
        let (a, c) = br.reduce_z_power(-1).unwrap();
        let qa = br.q_tilde().mul(&a).unwrap();
        let qc = br.q_tilde().mul(&c).unwrap();
        let order = qa.order();
        let vars = qa.vars().clone();
        let syms = b.qh.spec.symbols().clone();
        let lambda = Series::constant(&vars, order, b.qh.lambda());
        assert_eq!(qa, lambda.neg().truncate(order).unwrap());
        assert_eq!(qc, Series::one(&vars, order, &syms));
    }

    #[test]
    fn divisor_connection_columns() {
        // ∇_{y1}[Ω] = u⁻¹([zΩ] − λ[Ω]); ∇_{y1}[zΩ] = u⁻¹ q̃ [Ω].
        let b = small();
        let a = b.equiv.r_tstruct.mat(0);
        let syms = b.qh.spec.symbols().clone();
        let res = a.residue(&syms);
        assert_eq!(res[(0, 0)], b.qh.lambda().neg());
        assert!(res[(1, 0)].is_one());
        assert_eq!(res[(0, 1)], b.qh.q());
        assert!(res[(1, 1)].is_zero());
        // The (0,1) entry carries q·e^{y1} at higher orders.
        assert_eq!(a[(0, 1)], *b.brieskorn.q_tilde());
    }

    #[test]
    fn reduction_confluence() {
        // The downward and upward rule applications are mutually consistent:
        // the defining relation [z^{m+1}] = (λ − um)[z^m] + q̃[z^{m−1}] holds
        // for every m in the window, whichever direction produced each side.
        let b = small();
        let br = &b.brieskorn;
        for m in -3..=3i64 {
            let lo = br.reduce_z_power(m - 1).unwrap();
            let mid = br.reduce_z_power(m).unwrap();
            let hi = br.reduce_z_power(m + 1).unwrap();
            let c = br.lambda_minus_um(m);
            let rhs0 = c.mul(&mid.0).unwrap().add(&br.q_tilde().mul(&lo.0).unwrap());
            let rhs1 = c.mul(&mid.1).unwrap().add(&br.q_tilde().mul(&lo.1).unwrap());
            assert_eq!(hi.0, rhs0, "m = {m}");
            assert_eq!(hi.1, rhs1, "m = {m}");
        }
        // At u = 0 the relations are exponent-independent, so multiplication
        // by z is well-defined there and commutes with reduction.
        let u0 = |s: &Series| s.u_coefficient(0);
        let mz = br.z_power_mult_matrix(1).unwrap().map(u0);
        for m in -3..=3i64 {
            let (a, c) = br.reduce_z_power(m).unwrap();
            let (a1, c1) = br.reduce_z_power(m + 1).unwrap();
            let via = mz.mul_vec(&[u0(&a), u0(&c)]).unwrap();
            assert_eq!(via[0], u0(&a1), "u=0, m = {m}");
            assert_eq!(via[1], u0(&c1), "u=0, m = {m}");
        }
    }

    #[test]
    fn window_bound_is_enforced() {
        let b = small();
        let w = b.brieskorn.window();
        assert!(matches!(
            b.brieskorn.reduce_z_power(w + 1),
            Err(Error::ReductionWindowExceeded { .. })
        ));
    }

    #[test]
    fn unfolded_model_is_maximal_with_unit_certificate() {
        let b = unfolded_p1_b_model(3, 1, 4).unwrap();
        let syms = b.qh.spec.symbols().clone();
        let v = vec![Scalar::one(&syms), Scalar::zero(&syms)];
        let max = check_maximal(&Bundle::T(b.equiv.r_tstruct.clone()), &v).unwrap();
        assert!(max.maximal);
        // Columns are [zΩ] − λ[Ω] and [Ω]: determinant ±1.
        assert_eq!(max.certificate, Scalar::from_i64(&syms, -1));
        // Restriction y2 = 0 recovers the small model.
        let small = p1_b_model(3, 1, 4).unwrap();
        let restricted = b.equiv.r_tstruct.mat(0).restrict_var(1);
        for i in 0..2 {
            for j in 0..2 {
                let emb = small.equiv.r_tstruct.mat(0)[(i, j)]
                    .embed(b.equiv.r_tstruct.vars(), b.equiv.r_tstruct.order())
                    .unwrap();
                assert_eq!(restricted[(i, j)], emb);
            }
        }
    }
}
