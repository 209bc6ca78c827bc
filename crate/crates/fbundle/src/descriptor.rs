//! The JSON bundle-descriptor schema (version 1): connection matrices as
//! grids of series strings in the literal grammar, with optional
//! u-direction, equivariant pairing, grading and unfolding metadata.
//! Serialization is canonical, so export → ingest → export is
//! byte-identical.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::connection::{Bundle, FBundle, Grading, TStructure};
use crate::equivariant::{assemble_equivariant, EquivFBundle};
use crate::error::{Error, Result};
use crate::matrix::ScalarMatrix;
use crate::parse::{parse_scalar, parse_series, scalar_to_string, series_to_string};
use crate::scalar::Scalar;
use crate::series::{SeriesMatrix, TruncOrder, VarSet};
use crate::symbols::{Flavor, ParamSpec};
use crate::unfolding::UnfoldResult;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsDesc {
    pub base: Vec<String>,
    pub equivariant: Vec<String>,
    pub flavor: Flavor,
    pub localized_at: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradingDesc {
    pub mu_bar: Vec<Vec<String>>,
    pub euler_const: Vec<String>,
    pub euler_weight: Vec<i64>,
    pub lambda_euler: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnfoldMeta {
    pub added_vars: Vec<String>,
    pub cyclic_vector: Vec<String>,
    pub good_basis: Vec<Vec<String>>,
    pub f_data: Vec<String>,
    pub certificate_matrix: Vec<Vec<String>>,
    pub certificate_det: String,
    pub original: Box<Descriptor>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Descriptor {
    pub schema: u32,
    pub params: ParamsDesc,
    pub vars: Vec<String>,
    pub rank: usize,
    pub connection: BTreeMap<String, Vec<Vec<String>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_matrix: Option<Vec<Vec<String>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_lambda_euler: Option<bool>,
    pub order: TruncOrder,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_cap: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_structure: Option<Box<Descriptor>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grading: Option<GradingDesc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unfold_meta: Option<UnfoldMeta>,
}

/// What a descriptor parses to.
#[allow(clippy::large_enum_variant)]
pub enum Loaded {
    T(TStructure),
    F(FBundle),
    Equiv(EquivFBundle),
}

impl Descriptor {
    pub fn param_spec(&self) -> Result<ParamSpec> {
        let base: Vec<&str> = self.params.base.iter().map(|s| s.as_str()).collect();
        let equiv: Vec<&str> = self.params.equivariant.iter().map(|s| s.as_str()).collect();
        let mut spec = ParamSpec::new(&base, &equiv, self.params.flavor)?;
        for l in &self.params.localized_at {
            let s = parse_scalar(l, &spec)?;
            if !s.den().is_constant() {
                return Err(Error::Invalid("localization must be a polynomial".into()));
            }
            spec.localize(s.num().clone())?;
        }
        Ok(spec)
    }

    fn grid_to_matrix(
        &self,
        grid: &[Vec<String>],
        spec: &ParamSpec,
        vars: &std::sync::Arc<VarSet>,
    ) -> Result<SeriesMatrix> {
        let n = self.rank;
        if grid.len() != n || grid.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(format!("expected {n}x{n} grid")));
        }
        let mut entries = Vec::with_capacity(n * n);
        for row in grid {
            for s in row {
                entries.push(parse_series(s, spec, vars, self.order)?);
            }
        }
        SeriesMatrix::new(n, entries)
    }

    pub fn load(&self) -> Result<Loaded> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported schema version {}",
                self.schema
            )));
        }
        let spec = self.param_spec()?;
        let vars = VarSet::new(self.vars.clone());
        let mut mats = Vec::with_capacity(vars.len());
        for name in vars.names() {
            let grid = self.connection.get(name).ok_or_else(|| {
                Error::Invalid(format!("missing connection matrix for `{name}`"))
            })?;
            mats.push(self.grid_to_matrix(grid, &spec, &vars)?);
        }
        let t = TStructure::new(spec.clone(), vars.clone(), mats)?;
        let f = match &self.u_matrix {
            None => None,
            Some(grid) => {
                let u = self.grid_to_matrix(grid, &spec, &vars)?;
                Some(
                    FBundle::new(t.clone(), u)?
                        .with_lambda_euler(self.u_lambda_euler.unwrap_or(false)),
                )
            }
        };
        if let Some(r_desc) = &self.r_structure {
            let Some(f) = f else {
                return Err(Error::Invalid(
                    "equivariant descriptor needs a u_matrix".into(),
                ));
            };
            let cap = self
                .lambda_cap
                .ok_or_else(|| Error::Invalid("equivariant descriptor needs lambda_cap".into()))?;
            let Loaded::T(r_t) = r_desc.load()? else {
                return Err(Error::Invalid(
                    "the r_structure must be a plain (T)-structure".into(),
                ));
            };
            let mut e = assemble_equivariant(f, r_t, cap)?;
            if let Some(g) = &self.grading {
                e.k_grading = Some(grading_from_desc(g, &spec)?);
            }
            if let Some(rg) = &r_desc.grading {
                e.r_grading = Some(grading_from_desc(rg, &spec)?);
            }
            return Ok(Loaded::Equiv(e));
        }
        Ok(match f {
            Some(f) => Loaded::F(f),
            None => Loaded::T(t),
        })
    }
}

fn grading_from_desc(g: &GradingDesc, spec: &ParamSpec) -> Result<Grading> {
    let n = g.mu_bar.len();
    let mut data = Vec::with_capacity(n * n);
    for row in &g.mu_bar {
        for s in row {
            data.push(parse_scalar(s, spec)?);
        }
    }
    Ok(Grading {
        mu_bar: ScalarMatrix::new(n, n, data)?,
        euler_const: g
            .euler_const
            .iter()
            .map(|s| parse_scalar(s, spec))
            .collect::<Result<_>>()?,
        euler_weight: g.euler_weight.clone(),
        lambda_euler: g.lambda_euler,
    })
}

fn grading_to_desc(g: &Grading) -> GradingDesc {
    GradingDesc {
        mu_bar: matrix_grid(&g.mu_bar),
        euler_const: g.euler_const.iter().map(scalar_to_string).collect(),
        euler_weight: g.euler_weight.clone(),
        lambda_euler: g.lambda_euler,
    }
}

pub fn matrix_grid(m: &ScalarMatrix) -> Vec<Vec<String>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| scalar_to_string(&m[(i, j)])).collect())
        .collect()
}

fn series_grid(m: &SeriesMatrix) -> Vec<Vec<String>> {
    let n = m.size();
    (0..n)
        .map(|i| (0..n).map(|j| series_to_string(&m[(i, j)])).collect())
        .collect()
}

fn params_desc(spec: &ParamSpec) -> ParamsDesc {
    ParamsDesc {
        base: spec.base_names().to_vec(),
        equivariant: spec.equiv_names().to_vec(),
        flavor: spec.flavor,
        localized_at: spec
            .localized_at
            .iter()
            .map(crate::parse::poly_to_string)
            .collect(),
    }
}

pub fn tstructure_to_descriptor(t: &TStructure) -> Descriptor {
    let mut connection = BTreeMap::new();
    for (i, name) in t.vars().names().iter().enumerate() {
        connection.insert(name.clone(), series_grid(t.mat(i)));
    }
    Descriptor {
        schema: SCHEMA_VERSION,
        params: params_desc(&t.spec),
        vars: t.vars().names().to_vec(),
        rank: t.rank(),
        connection,
        u_matrix: None,
        u_lambda_euler: None,
        order: t.order(),
        lambda_cap: None,
        r_structure: None,
        grading: None,
        unfold_meta: None,
    }
}

pub fn fbundle_to_descriptor(f: &FBundle) -> Descriptor {
    let mut d = tstructure_to_descriptor(&f.t);
    d.u_matrix = Some(series_grid(&f.u_mat));
    if f.lambda_euler {
        d.u_lambda_euler = Some(true);
    }
    d
}

pub fn bundle_to_descriptor(b: &Bundle) -> Descriptor {
    match b {
        Bundle::T(t) => tstructure_to_descriptor(t),
        Bundle::F(f) => fbundle_to_descriptor(f),
    }
}

pub fn equiv_to_descriptor(e: &EquivFBundle) -> Descriptor {
    let mut d = fbundle_to_descriptor(&e.k_bundle);
    d.lambda_cap = Some(e.lambda_cap);
    let mut r = tstructure_to_descriptor(&e.r_tstruct);
    if let Some(rg) = &e.r_grading {
        r.grading = Some(grading_to_desc(rg));
    }
    d.r_structure = Some(Box::new(r));
    if let Some(kg) = &e.k_grading {
        d.grading = Some(grading_to_desc(kg));
    }
    d
}

pub fn unfold_result_to_descriptor(u: &UnfoldResult, original: &Bundle) -> Descriptor {
    let mut d = bundle_to_descriptor(&u.bundle);
    d.unfold_meta = Some(UnfoldMeta {
        added_vars: u.added_vars.clone(),
        cyclic_vector: cyclic_of(u),
        good_basis: matrix_grid(&u.good_basis),
        f_data: u.f_data.iter().map(series_to_string).collect(),
        certificate_matrix: matrix_grid(&u.certificate.matrix),
        certificate_det: scalar_to_string(&u.certificate.det),
        original: Box::new(bundle_to_descriptor(original)),
    });
    d
}

fn cyclic_of(u: &UnfoldResult) -> Vec<String> {
    // First column of the good basis is the cyclic vector.
    (0..u.good_basis.rows())
        .map(|i| scalar_to_string(&u.good_basis[(i, 0)]))
        .collect()
}

/// Rebuild an [`UnfoldResult`] from a descriptor carrying unfold metadata
/// (used by the compare command). The framed internals are re-derived
/// deterministically from the stored bundles.
pub fn unfold_result_from_descriptor(d: &Descriptor) -> Result<UnfoldResult> {
    let meta = d
        .unfold_meta
        .as_ref()
        .ok_or_else(|| Error::Invalid("descriptor has no unfold metadata".into()))?;
    let bundle = match d.load()? {
        Loaded::T(t) => Bundle::T(t),
        Loaded::F(f) => Bundle::F(f),
        Loaded::Equiv(_) => {
            return Err(Error::Invalid(
                "compare expects plain bundles, not equivariant pairs".into(),
            ))
        }
    };
    let original = match meta.original.load()? {
        Loaded::T(t) => Bundle::T(t),
        Loaded::F(f) => Bundle::F(f),
        Loaded::Equiv(_) => {
            return Err(Error::Invalid("unexpected equivariant original".into()))
        }
    };
    let spec = bundle.tstructure().spec.clone();
    let n = bundle.rank();
    let mut gb = Vec::with_capacity(n * n);
    for row in &meta.good_basis {
        for s in row {
            gb.push(parse_scalar(s, &spec)?);
        }
    }
    let good_basis = ScalarMatrix::new(n, n, gb)?;
    let cyclic: Vec<Scalar> = meta
        .cyclic_vector
        .iter()
        .map(|s| parse_scalar(s, &spec))
        .collect::<Result<_>>()?;
    let vars = bundle.tstructure().vars().clone();
    let order = bundle.tstructure().order();
    let f_data: Vec<crate::series::Series> = meta
        .f_data
        .iter()
        .map(|s| parse_series(s, &spec, &vars, order))
        .collect::<Result<_>>()?;
    // The certificate and framed internals are re-derived from the bundles;
    // the stored certificate strings are documentation.
    crate::unfolding::promote_unfolding(
        &bundle,
        &original,
        meta.added_vars.clone(),
        &good_basis,
        f_data,
        &cyclic,
    )
}

/// Canonical text form: pretty JSON with a trailing newline.
pub fn to_canonical_json(d: &Descriptor) -> String {
    let mut s = serde_json::to_string_pretty(d).expect("descriptor serializes");
    s.push('\n');
    s
}

pub fn from_json(s: &str) -> Result<Descriptor> {
    serde_json::from_str(s).map_err(|e| Error::Parse {
        line: e.line(),
        col: e.column(),
        msg: e.to_string(),
    })
}
