//! JSON interchange formats.
//!
//! Each schema is a plain serde struct with conversions to and from the
//! library types. Complex numbers are read from `{"re", "im"}` objects,
//! `[re, im]` pairs or bare reals, and always written as objects. Exact
//! rationals travel as `"p/q"` strings.

use serde::{Deserialize, Serialize};

use crate::chart::{target_symbol, FiberChart};
use crate::error::{Error, Result};
use crate::factor::{ElementaryFactor, VerifyReport};
use crate::matrix::Matrix;
use crate::polyring::{Monomial, Poly, VarId};
use crate::scalar::{parse_rational, rational_to_string, ExactComplex};
use crate::spray::Point;
use crate::submersion::{RankReport, SingularImageReport};
use crate::tracker::TrackRecord;
use crate::unipotent::{coordinates, FactorChain, Orientation, ParamVector, Side};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "ComplexRepr")]
pub struct ComplexJson {
    pub re: f64,
    pub im: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ComplexRepr {
    Object {
        re: f64,
        #[serde(default)]
        im: f64,
    },
    Pair([f64; 2]),
    Real(f64),
}

impl From<ComplexRepr> for ComplexJson {
    fn from(r: ComplexRepr) -> Self {
        let (re, im) = match r {
            ComplexRepr::Object { re, im } => (re, im),
            ComplexRepr::Pair([re, im]) => (re, im),
            ComplexRepr::Real(re) => (re, 0.0),
        };
        ComplexJson { re, im }
    }
}

impl From<C64> for ComplexJson {
    fn from(z: C64) -> Self {
        ComplexJson { re: z.re, im: z.im }
    }
}

impl From<ComplexJson> for C64 {
    fn from(z: ComplexJson) -> Self {
        C64::new(z.re, z.im)
    }
}

pub fn vector_to_json(v: &[C64]) -> Vec<ComplexJson> {
    v.iter().copied().map(ComplexJson::from).collect()
}

pub fn vector_from_json(v: &[ComplexJson]) -> Vec<C64> {
    v.iter().copied().map(C64::from).collect()
}

/// Parses a JSON document into a schema type, mapping failures to
/// [`Error::Parse`].
pub fn from_value<T: serde::de::DeserializeOwned>(value: serde_json::Value, what: &str) -> Result<T> {
    serde_json::from_value(value).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

pub fn from_str<T: serde::de::DeserializeOwned>(s: &str, what: &str) -> Result<T> {
    serde_json::from_str(s).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "MatrixRepr")]
pub struct MatrixJson {
    pub n: usize,
    pub rows: Vec<Vec<ComplexJson>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixRepr {
    Full { n: usize, rows: Vec<Vec<ComplexJson>> },
    Rows(Vec<Vec<ComplexJson>>),
}

impl From<MatrixRepr> for MatrixJson {
    fn from(r: MatrixRepr) -> Self {
        match r {
            MatrixRepr::Full { n, rows } => MatrixJson { n, rows },
            MatrixRepr::Rows(rows) => MatrixJson { n: rows.len(), rows },
        }
    }
}

fn check_square<T>(n: usize, rows: &[Vec<T>]) -> Result<()> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse(format!("matrix rows do not form an {n}x{n} array")));
    }
    Ok(())
}

impl MatrixJson {
    pub fn from_matrix(m: &Matrix<C64>) -> Self {
        MatrixJson {
            n: m.rows(),
            rows: m.to_rows().iter().map(|r| vector_to_json(r)).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<Matrix<C64>> {
        check_square(self.n, &self.rows)?;
        Matrix::from_rows(self.rows.iter().map(|r| vector_from_json(r)).collect())
    }
}

/// A variable: `{"k", "row", "col"}` for a factor parameter, `{"name"}` for
/// a free symbol. Strings in the `z[row,col;k]` notation are also accepted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VarJson {
    Param { k: usize, row: usize, col: usize },
    Free { name: String },
    Text(String),
}

impl From<&VarId> for VarJson {
    fn from(v: &VarId) -> Self {
        match v {
            VarId::Param { factor, row, col } => VarJson::Param { k: *factor, row: *row, col: *col },
            VarId::Free(name) => VarJson::Free { name: name.clone() },
        }
    }
}

impl VarJson {
    pub fn to_var(&self) -> Result<VarId> {
        match self {
            VarJson::Param { k, row, col } => VarId::param(*k, *row, *col),
            VarJson::Free { name } => name.parse(),
            VarJson::Text(s) => s.parse(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PowerJson {
    pub var: VarJson,
    pub exp: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermJson {
    pub mono: Vec<PowerJson>,
    pub re: String,
    #[serde(default = "zero_string")]
    pub im: String,
}

fn zero_string() -> String {
    "0".into()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyJson {
    pub terms: Vec<TermJson>,
}

impl PolyJson {
    pub fn from_poly(p: &Poly) -> Self {
        let terms = p
            .terms()
            .map(|(m, c)| TermJson {
                mono: m
                    .factors()
                    .iter()
                    .map(|(v, e)| PowerJson { var: v.into(), exp: *e })
                    .collect(),
                re: rational_to_string(&c.re),
                im: rational_to_string(&c.im),
            })
            .collect();
        PolyJson { terms }
    }

    pub fn to_poly(&self) -> Result<Poly> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let mut powers = Vec::with_capacity(t.mono.len());
            for p in &t.mono {
                powers.push((p.var.to_var()?, p.exp));
            }
            let c = ExactComplex::new(parse_rational(&t.re)?, parse_rational(&t.im)?);
            terms.push((Monomial::from_factors(powers), c));
        }
        Ok(Poly::from_terms(terms))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyMatrixJson {
    pub n: usize,
    pub rows: Vec<Vec<PolyJson>>,
}

impl PolyMatrixJson {
    pub fn from_matrix(m: &Matrix<Poly>) -> Self {
        PolyMatrixJson {
            n: m.rows(),
            rows: m.to_rows().iter().map(|r| r.iter().map(PolyJson::from_poly).collect()).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<Matrix<Poly>> {
        check_square(self.n, &self.rows)?;
        let rows = self
            .rows
            .iter()
            .map(|r| r.iter().map(PolyJson::to_poly).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Matrix::from_rows(rows)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryJson {
    pub row: usize,
    pub col: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorJson {
    pub k: usize,
    /// Only needed when it differs from the parity of `k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
    pub entries: Vec<EntryJson>,
}

/// A parameter chain, or (with explicit sides) a general factor list whose
/// product is read left to right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainJson {
    pub n: usize,
    pub orientation: Orientation,
    pub factors: Vec<FactorJson>,
}

fn entries_json(n: usize, side: Side, values: &[C64]) -> Vec<EntryJson> {
    coordinates(n, side)
        .into_iter()
        .zip(values)
        .map(|((row, col), z)| EntryJson { row, col, re: z.re, im: z.im })
        .collect()
}

fn entry_pairs(f: &FactorJson) -> impl Iterator<Item = ((usize, usize), C64)> + '_ {
    f.entries.iter().map(|e| ((e.row, e.col), C64::new(e.re, e.im)))
}

impl ChainJson {
    pub fn from_chain(chain: &FactorChain<C64>) -> Self {
        let factors = chain
            .factors()
            .iter()
            .map(|p| FactorJson {
                k: p.factor(),
                side: None,
                entries: entries_json(chain.n(), p.side(), p.entries()),
            })
            .collect();
        ChainJson { n: chain.n(), orientation: chain.orientation(), factors }
    }

    pub fn to_chain(&self) -> Result<FactorChain<C64>> {
        let mut params = Vec::with_capacity(self.factors.len());
        for f in &self.factors {
            if f.side.is_some_and(|s| s != Side::of_factor(f.k)) {
                return Err(Error::Parity(format!("factor {} of a chain cannot be {:?}", f.k, f.side.unwrap())));
            }
            params.push(ParamVector::from_entries(self.n, f.k, entry_pairs(f))?);
        }
        FactorChain::new(self.n, self.orientation, params)
    }

    /// A factor list, numbered from 1, with every side written out.
    pub fn from_factors(n: usize, factors: &[ElementaryFactor<C64>]) -> Self {
        let factors = factors
            .iter()
            .enumerate()
            .map(|(i, f)| FactorJson {
                k: i + 1,
                side: Some(f.side),
                entries: entries_json(n, f.side, &f.entries),
            })
            .collect();
        ChainJson { n, orientation: Orientation::Direct, factors }
    }

    /// The factor list in product order; inverse chains are expanded into
    /// the inverted factors.
    pub fn to_factors(&self) -> Result<Vec<ElementaryFactor<C64>>> {
        let mut out = Vec::with_capacity(self.factors.len());
        for f in &self.factors {
            let side = f.side.unwrap_or(Side::of_factor(f.k));
            let mut m = Matrix::identity(self.n);
            for ((r, c), v) in entry_pairs(f) {
                if r == 0 || c == 0 || r > self.n || c > self.n || !side.contains(r, c) {
                    return Err(Error::Parity(format!("entry ({r},{c}) is not in a {side:?} factor of size {}", self.n)));
                }
                m.set(r - 1, c - 1, v);
            }
            let e = ElementaryFactor::from_matrix(side, &m);
            out.push(match self.orientation {
                Orientation::Direct => e,
                Orientation::Inverse => e.inverse(),
            });
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyEntryJson {
    pub row: usize,
    pub col: usize,
    pub poly: PolyJson,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyFactorJson {
    pub k: usize,
    pub side: Side,
    pub entries: Vec<PolyEntryJson>,
}

/// A factor list with polynomial entries, product read left to right.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyFactorsJson {
    pub n: usize,
    pub factors: Vec<PolyFactorJson>,
}

impl PolyFactorsJson {
    pub fn from_factors(n: usize, factors: &[ElementaryFactor<Poly>]) -> Self {
        let factors = factors
            .iter()
            .enumerate()
            .map(|(i, f)| PolyFactorJson {
                k: i + 1,
                side: f.side,
                entries: coordinates(n, f.side)
                    .into_iter()
                    .zip(&f.entries)
                    .map(|((row, col), p)| PolyEntryJson { row, col, poly: PolyJson::from_poly(p) })
                    .collect(),
            })
            .collect();
        PolyFactorsJson { n, factors }
    }

    pub fn to_factors(&self) -> Result<Vec<ElementaryFactor<Poly>>> {
        let mut out = Vec::with_capacity(self.factors.len());
        for f in &self.factors {
            let mut m = Matrix::identity(self.n);
            for e in &f.entries {
                if e.row == 0 || e.col == 0 || e.row > self.n || e.col > self.n || !f.side.contains(e.row, e.col) {
                    return Err(Error::Parity(format!("entry ({},{}) is not in a {:?} factor", e.row, e.col, f.side)));
                }
                m.set(e.row - 1, e.col - 1, e.poly.to_poly()?);
            }
            out.push(ElementaryFactor::from_matrix(f.side, &m));
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointEntryJson {
    pub var: VarJson,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

pub fn point_to_json(p: &Point<f64>) -> Vec<PointEntryJson> {
    p.iter()
        .map(|(v, z)| PointEntryJson { var: v.into(), re: z.re, im: z.im })
        .collect()
}

pub fn point_from_json(entries: &[PointEntryJson]) -> Result<Point<f64>> {
    entries
        .iter()
        .map(|e| Ok((e.var.to_var()?, C64::new(e.re, e.im))))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankReportJson {
    pub point: Vec<ComplexJson>,
    pub rank: usize,
    pub ratio: f64,
    #[serde(rename = "in_S_K")]
    pub in_singular_set: bool,
    pub agree: bool,
}

impl From<&RankReport> for RankReportJson {
    fn from(r: &RankReport) -> Self {
        RankReportJson {
            point: vector_to_json(&r.point),
            rank: r.rank,
            ratio: r.ratio,
            in_singular_set: r.in_singular_set,
            agree: r.agree,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularImageJson {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub restricted: Vec<PolyJson>,
    pub failures: Vec<usize>,
    pub ok: bool,
}

impl From<&SingularImageReport> for SingularImageJson {
    fn from(r: &SingularImageReport) -> Self {
        SingularImageJson {
            n: r.n,
            k: r.k,
            restricted: r.restricted.iter().map(PolyJson::from_poly).collect(),
            failures: r.failures.clone(),
            ok: r.ok(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyJson {
    pub matches: bool,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<f64>,
}

impl From<&VerifyReport> for VerifyJson {
    fn from(r: &VerifyReport) -> Self {
        VerifyJson { matches: r.matches, k: r.k, error: r.error }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolvedJson {
    pub var: VarJson,
    pub num: PolyJson,
    pub den: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartJson {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub stratum: usize,
    pub pivot: usize,
    pub target: Vec<ComplexJson>,
    pub solved: Vec<SolvedJson>,
    pub free: Vec<VarJson>,
    pub residual: PolyJson,
    pub residual_vars: Vec<VarJson>,
}

impl From<&FiberChart> for ChartJson {
    fn from(c: &FiberChart) -> Self {
        let den = target_symbol(c.pivot()).to_string();
        ChartJson {
            n: c.n(),
            k: c.k_total(),
            stratum: c.stratum(),
            pivot: c.pivot(),
            target: vector_to_json(c.target()),
            solved: c
                .solved()
                .iter()
                .map(|s| SolvedJson { var: (&s.var).into(), num: PolyJson::from_poly(&s.numerator), den: den.clone() })
                .collect(),
            free: c.free().iter().map(VarJson::from).collect(),
            residual: PolyJson::from_poly(c.residual()),
            residual_vars: c.residual_vars().iter().map(VarJson::from).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackRecordJson {
    pub t: f64,
    #[serde(rename = "Z")]
    pub z: ChainJson,
    pub residual: f64,
    pub min_singular_value: f64,
    pub singular_ratio: f64,
}

impl From<&TrackRecord> for TrackRecordJson {
    fn from(r: &TrackRecord) -> Self {
        TrackRecordJson {
            t: r.t,
            z: ChainJson::from_chain(&r.z),
            residual: r.residual,
            min_singular_value: r.min_singular_value,
            singular_ratio: r.singular_ratio,
        }
    }
}

/// One sample `b(t)` of a path in `C^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSampleJson {
    pub t: f64,
    pub b: Vec<ComplexJson>,
}

/// One sample `A(t)` of a matrix path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixSampleJson {
    pub t: f64,
    pub matrix: MatrixJson,
}
