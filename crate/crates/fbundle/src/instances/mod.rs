//! Built-in constructions: the rank-3 cyclic-weight bundle, the ℂP¹
//! equivariant A-model quantum D-module, the ℂP¹ B-model Brieskorn lattice
//! with its unfolded superpotential, and the mirror comparison between them.

pub mod brieskorn;
pub mod ex310;
pub mod mirror;
pub mod p1_a;
pub mod qh_p1;

pub use brieskorn::{p1_b_model, unfolded_p1_b_model, BrieskornP1, P1BModel};
pub use ex310::{make_ex310, symbolic_evaluation_matrix};
pub use mirror::{verify_small_mirror_p1, MirrorReport, MirrorWitness};
pub use p1_a::{p1_a_model, P1AModel};
pub use qh_p1::QhP1;

use crate::connection::Grading;
use crate::matrix::ScalarMatrix;
use crate::scalar::Scalar;
use crate::series::lambda_multi_indices;
use crate::symbols::ParamSpec;

/// Grading data shared by the two ℂP¹ models: the Euler field has constant
/// part (deg qⱼ/2) on the k = 0 divisor directions and linear weight
/// 1 − ℓ(vⱼ) − |k| on every t_{j,k}; the fiber grading is diagonal.
///
/// `dirs` lists (ℓ(vⱼ), Euler constant) per R-level variable; when
/// `lambda_cap` is `Some`, the data is blown up along the multi-indices.
pub fn standard_grading(
    spec: &ParamSpec,
    mu_diag: &[i64],
    dirs: &[(i64, i64)],
    lambda_cap: Option<u32>,
) -> Grading {
    let syms = spec.symbols();
    let n = mu_diag.len();
    let mut mu_bar = ScalarMatrix::zero(syms, n, n);
    for (i, &w) in mu_diag.iter().enumerate() {
        mu_bar[(i, i)] = Scalar::from_i64(syms, w);
    }
    let multis = match lambda_cap {
        Some(cap) => lambda_multi_indices(spec.n_equiv(), cap),
        None => vec![vec![0u16; spec.n_equiv()]],
    };
    let mut euler_const = Vec::new();
    let mut euler_weight = Vec::new();
    for &(len, cst) in dirs {
        for k in &multis {
            let kk: i64 = k.iter().map(|&x| x as i64).sum();
            euler_const.push(Scalar::from_i64(syms, if kk == 0 { cst } else { 0 }));
            euler_weight.push(1 - len - kk);
        }
    }
    Grading {
        mu_bar,
        euler_const,
        euler_weight,
        lambda_euler: true,
    }
}
