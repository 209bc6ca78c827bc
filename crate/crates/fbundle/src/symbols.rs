use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered list of parameter symbols shared by every [`crate::poly::Poly`]
/// in one computation. Base parameters come first, equivariant parameters
/// after them; exponent vectors index into this list.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolSet {
    names: Vec<String>,
}

impl SymbolSet {
    pub fn new(names: Vec<String>) -> Arc<Self> {
        Arc::new(SymbolSet { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Which ring the equivariant parameters live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    /// R = k[λ₁,…,λₙ]; units are the nonzero λ-free elements up to
    /// declared localizations.
    Polynomial,
    /// R = k⟦λ₁,…,λₙ⟧ (represented by polynomials); units are the elements
    /// with nonzero constant λ-term, up to declared localizations.
    PowerSeriesLocal,
}

/// The coefficient tower: ℚ → rational functions in the base parameters →
/// polynomials/series in the equivariant parameters, possibly localized.
#[derive(Debug, Clone)]
pub struct ParamSpec {
    syms: Arc<SymbolSet>,
    n_base: usize,
    pub flavor: Flavor,
    /// Nonzero polynomials in the equivariant parameters that have been
    /// inverted. Stored as raw polynomials over `syms`.
    pub localized_at: Vec<crate::poly::Poly>,
}

impl ParamSpec {
    pub fn new(base: &[&str], equiv: &[&str], flavor: Flavor) -> Result<Self> {
        let mut names: Vec<String> = Vec::with_capacity(base.len() + equiv.len());
        for s in base.iter().chain(equiv.iter()) {
            if names.iter().any(|n| n == s) {
                return Err(Error::Invalid(format!("duplicate parameter symbol `{s}`")));
            }
            names.push((*s).to_string());
        }
        Ok(ParamSpec {
            syms: SymbolSet::new(names),
            n_base: base.len(),
            flavor,
            localized_at: Vec::new(),
        })
    }

    pub fn symbols(&self) -> &Arc<SymbolSet> {
        &self.syms
    }

    pub fn n_base(&self) -> usize {
        self.n_base
    }

    pub fn n_equiv(&self) -> usize {
        self.syms.len() - self.n_base
    }

    pub fn is_base(&self, idx: usize) -> bool {
        idx < self.n_base
    }

    pub fn is_equiv(&self, idx: usize) -> bool {
        idx >= self.n_base && idx < self.syms.len()
    }

    pub fn base_names(&self) -> &[String] {
        &self.syms.names()[..self.n_base]
    }

    pub fn equiv_names(&self) -> &[String] {
        &self.syms.names()[self.n_base..]
    }

    /// Declare a localization. The polynomial must be nonzero and involve
    /// only equivariant parameters.
    pub fn localize(&mut self, p: crate::poly::Poly) -> Result<()> {
        if p.is_zero() {
            return Err(Error::Invalid("cannot localize at zero".into()));
        }
        for i in 0..self.n_base {
            if p.degree_in(i) > 0 {
                return Err(Error::Invalid(
                    "localizations must be polynomials in the equivariant parameters only".into(),
                ));
            }
        }
        self.localized_at.push(p);
        Ok(())
    }

    /// Compatibility for arithmetic: same symbol table, flavor and
    /// localizations.
    pub fn same_ring(&self, other: &ParamSpec) -> bool {
        self.syms == other.syms
            && self.n_base == other.n_base
            && self.flavor == other.flavor
            && self.localized_at == other.localized_at
    }
}
