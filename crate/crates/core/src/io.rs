//! Text formats: the shared matrix document and structured run reports.
//!
//! Both are JSON. Floating-point values are written with 17 significant
//! digits, objects are indented one key per line, and arrays stay on one
//! line so that matrix entries remain compact.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::decomp::{Decomposability, DecompositionReport, SolveSummary};
use crate::error::{Error, Result};
use crate::hierarchy::{
    AssemblyInfo, DensityMatrix, ExtensionCheck, ExtensionSpec, SolverSummary, TestReport, Verdict,
};
use crate::posmap::{map_from_witness, witness_from_map, Direction, LinearMap, PositivityReport};
use crate::qlinalg::{c, CMat, TensorSpace};
use crate::sdp::CertificateCheck;
use crate::witness::{Witness, WitnessVerification};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    State,
    Operator,
}

/// A square matrix on a tensor product of local spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub dims: Vec<usize>,
    pub kind: MatrixKind,
    /// Row-major `[re, im]` pairs.
    pub entries: Vec<[f64; 2]>,
    /// Present on files that define a linear map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
}

fn format_err(field: &str, reason: impl Into<String>) -> Error {
    Error::Format { field: field.to_string(), reason: reason.into() }
}

impl MatrixFile {
    pub fn from_matrix(m: &CMat, dims: Vec<usize>, kind: MatrixKind) -> Result<Self> {
        TensorSpace::new(dims.clone())?.check_matrix(m)?;
        let n = m.nrows();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let z = m[(i, j)];
                entries.push([z.re, z.im]);
            }
        }
        Ok(Self { dims, kind, entries, direction: None })
    }

    pub fn state(rho: &DensityMatrix) -> Self {
        Self::from_matrix(rho.matrix(), vec![rho.d_a(), rho.d_b()], MatrixKind::State)
            .expect("density matrix dimensions are consistent")
    }

    pub fn operator(m: &CMat, dims: Vec<usize>) -> Result<Self> {
        Self::from_matrix(m, dims, MatrixKind::Operator)
    }

    /// The defining operator of `map` on `[A, B]`, annotated with `direction`.
    pub fn map(map: &LinearMap, direction: Direction) -> Result<Self> {
        let w = witness_from_map(map, direction)?;
        let dims = match direction {
            Direction::AToB => vec![map.in_dim, map.out_dim],
            Direction::BToA => vec![map.out_dim, map.in_dim],
        };
        let mut f = Self::operator(&w, dims)?;
        f.direction = Some(direction);
        Ok(f)
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn to_matrix(&self) -> CMat {
        let n = self.total_dim();
        CMat::from_fn(n, n, |i, j| {
            let [re, im] = self.entries[i * n + j];
            c(re, im)
        })
    }

    fn bipartite(&self, what: &str) -> Result<(usize, usize)> {
        match self.dims.as_slice() {
            [a, b] => Ok((*a, *b)),
            _ => Err(format_err("dims", format!("{what} needs exactly two local dimensions, found {}", self.dims.len()))),
        }
    }

    /// Interprets the file as a bipartite density matrix.
    pub fn to_state(&self) -> Result<DensityMatrix> {
        if self.kind != MatrixKind::State {
            return Err(format_err("kind", "expected \"state\""));
        }
        let (d_a, d_b) = self.bipartite("a state")?;
        DensityMatrix::new(self.to_matrix(), d_a, d_b)
    }

    /// Interprets the file as a bipartite Hermitian operator, returning `(W, d_A, d_B)`.
    pub fn to_bipartite_operator(&self) -> Result<(CMat, usize, usize)> {
        let (d_a, d_b) = self.bipartite("a bipartite operator")?;
        let m = self.to_matrix();
        crate::qlinalg::ensure_hermitian(&m)?;
        Ok((m, d_a, d_b))
    }

    /// Interprets the file as a linear map; a missing direction means `a_to_b`.
    pub fn to_map(&self) -> Result<LinearMap> {
        let (w, d_a, d_b) = self.to_bipartite_operator()?;
        map_from_witness(&w, d_a, d_b, self.direction.unwrap_or(Direction::AToB))
    }

    /// Writes the matrix document.
    pub fn to_text(&self) -> String {
        to_text(self).expect("matrix files contain only finite numbers")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| format_err("document", e.to_string()))?;
        Self::from_value(&value)
    }

    /// Field-by-field validation so that errors name the offending field.
    pub fn from_value(value: &Value) -> Result<Self> {
        let obj = value.as_object().ok_or_else(|| format_err("document", "expected an object"))?;
        let dims = obj
            .get("dims")
            .ok_or_else(|| format_err("dims", "missing"))?
            .as_array()
            .ok_or_else(|| format_err("dims", "expected a list of positive integers"))?
            .iter()
            .map(|d| d.as_u64().filter(|&d| d >= 1).map(|d| d as usize))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| format_err("dims", "expected a list of positive integers"))?;
        if dims.is_empty() {
            return Err(format_err("dims", "empty list"));
        }
        let kind = match obj.get("kind").ok_or_else(|| format_err("kind", "missing"))?.as_str() {
            Some("state") => MatrixKind::State,
            Some("operator") => MatrixKind::Operator,
            _ => return Err(format_err("kind", "expected \"state\" or \"operator\"")),
        };
        let direction = match obj.get("direction") {
            None | Some(Value::Null) => None,
            Some(v) => Some(
                serde_json::from_value::<Direction>(v.clone())
                    .map_err(|_| format_err("direction", "expected \"a_to_b\" or \"b_to_a\""))?,
            ),
        };
        let n: usize = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| format_err("dims", "product overflows"))?;
        let raw = obj
            .get("entries")
            .ok_or_else(|| format_err("entries", "missing"))?
            .as_array()
            .ok_or_else(|| format_err("entries", "expected a list of [re, im] pairs"))?;
        if raw.len() != n * n {
            return Err(format_err("entries", format!("expected {} pairs for dimension {n}, found {}", n * n, raw.len())));
        }
        let mut entries = Vec::with_capacity(raw.len());
        for (idx, e) in raw.iter().enumerate() {
            let pair = e
                .as_array()
                .filter(|p| p.len() == 2)
                .and_then(|p| Some([p[0].as_f64()?, p[1].as_f64()?]))
                .ok_or_else(|| format_err("entries", format!("entry {idx} is not an [re, im] pair of numbers")))?;
            entries.push(pair);
        }
        Ok(Self { dims, kind, entries, direction })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_text())
    }
}

/// JSON formatter: indented objects, inline arrays, 17 significant digits.
#[derive(Default)]
struct ReportFormatter {
    indent: usize,
    has_value: bool,
}

impl ReportFormatter {
    fn newline<W: ?Sized + std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(b"\n")?;
        for _ in 0..self.indent {
            w.write_all(b"  ")?;
        }
        Ok(())
    }
}

impl serde_json::ser::Formatter for ReportFormatter {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + std::io::Write>(&mut self, w: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_object<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.indent += 1;
        self.has_value = false;
        w.write_all(b"{")
    }

    fn end_object<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.indent -= 1;
        if self.has_value {
            self.newline(w)?;
        }
        w.write_all(b"}")
    }

    fn begin_object_key<W: ?Sized + std::io::Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        if !first {
            w.write_all(b",")?;
        }
        self.newline(w)
    }

    fn begin_object_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        w.write_all(b": ")
    }

    fn end_object_value<W: ?Sized + std::io::Write>(&mut self, _w: &mut W) -> std::io::Result<()> {
        self.has_value = true;
        Ok(())
    }
}

/// Serializes any record in the project text format.
pub fn to_text<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, ReportFormatter::default());
    value.serialize(&mut ser).map_err(|e| format_err("document", e.to_string()))?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

pub fn from_text<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| format_err("document", e.to_string()))
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessRecord {
    /// Unit-spectral-radius operator on `[d_A, d_B]`.
    pub operator: MatrixFile,
    pub scale: f64,
    pub spec: Option<ExtensionSpec>,
    pub verification: WitnessVerification,
}

impl WitnessRecord {
    pub fn new(w: &Witness) -> Result<Self> {
        Ok(Self {
            operator: MatrixFile::operator(&w.operator, vec![w.d_a, w.d_b])?,
            scale: w.scale,
            spec: w.provenance.as_ref().map(|p| p.spec),
            verification: w.verification.clone(),
        })
    }
}

/// Serializable form of a [`TestReport`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestRecord {
    pub spec: ExtensionSpec,
    pub status: Verdict,
    pub assembly: AssemblyInfo,
    pub solver: SolverSummary,
    pub extension_check: Option<ExtensionCheck>,
    pub certificate: Option<CertificateCheck>,
    pub witness: Option<WitnessRecord>,
    /// ρ̃ on `[A; k] ⊗ B`.
    pub extension: Option<MatrixFile>,
    /// Dual blocks `Z_b` in the compressed block bases.
    pub dual_blocks: Option<Vec<MatrixFile>>,
    pub warnings: Vec<String>,
}

impl TestRecord {
    pub fn new(r: &TestReport) -> Result<Self> {
        let mut ext_dims = vec![r.assembly.d_a; r.spec.k];
        ext_dims.push(r.assembly.d_b);
        let extension = r.extension.as_ref().map(|x| MatrixFile::operator(x, ext_dims)).transpose()?;
        let dual_blocks = r
            .dual_blocks
            .as_ref()
            .map(|zs| zs.iter().map(|z| MatrixFile::operator(z, vec![z.nrows()])).collect::<Result<Vec<_>>>())
            .transpose()?;
        Ok(Self {
            spec: r.spec,
            status: r.status,
            assembly: r.assembly.clone(),
            solver: r.solver.clone(),
            extension_check: r.extension_check.clone(),
            certificate: r.certificate.clone(),
            witness: r.witness.as_ref().map(WitnessRecord::new).transpose()?,
            extension,
            dual_blocks,
            warnings: r.warnings.clone(),
        })
    }

    pub fn dual_block_matrices(&self) -> Option<Vec<CMat>> {
        self.dual_blocks.as_ref().map(|zs| zs.iter().map(MatrixFile::to_matrix).collect())
    }
}

/// Serializable form of a [`DecompositionReport`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionRecord {
    pub d_a: usize,
    pub d_b: usize,
    pub eta: f64,
    pub epsilon: f64,
    pub epsilon_cross_check: f64,
    pub state_value: f64,
    pub verdict: Decomposability,
    pub reconstruction_residual: f64,
    pub rho_agreement: f64,
    pub p_opt: MatrixFile,
    pub q_opt: MatrixFile,
    pub rho_opt: Option<MatrixFile>,
    pub state_form: SolveSummary,
    pub decomposition_form: SolveSummary,
    pub notes: Vec<String>,
}

impl DecompositionRecord {
    pub fn new(r: &DecompositionReport) -> Result<Self> {
        let dims = vec![r.d_a, r.d_b];
        Ok(Self {
            d_a: r.d_a,
            d_b: r.d_b,
            eta: r.eta,
            epsilon: r.epsilon,
            epsilon_cross_check: r.epsilon_cross_check,
            state_value: r.state_value,
            verdict: r.verdict,
            reconstruction_residual: r.reconstruction_residual,
            rho_agreement: r.rho_agreement,
            p_opt: MatrixFile::operator(&r.p_opt, dims.clone())?,
            q_opt: MatrixFile::operator(&r.q_opt, dims)?,
            rho_opt: r.rho_opt.as_ref().map(MatrixFile::state),
            state_form: r.state_form.clone(),
            decomposition_form: r.decomposition_form.clone(),
            notes: r.notes.clone(),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PositivityRecord {
    pub map: MatrixFile,
    pub k_max: usize,
    pub report: PositivityReport,
}
