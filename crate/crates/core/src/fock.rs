//! Graded symmetric coefficient tensors and the ladder maps that pair them
//! with a fixed direction: lowering, raising, and an explicit right inverse
//! of the lowering map.

use crate::error::{Error, Result};

/// Largest degree and dimension the exact slot combinatorics supports.
const ORDER_CAP: usize = 16;

/// Directions shorter than this make the right inverse useless in doubles.
const NORM_FLOOR: f64 = 1e-12;

/// Exact binomial coefficient by the multiplicative rule.
fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - k + 1 + i) / (i + 1);
    }
    acc
}

/// Number of coefficient slots of a symmetric tensor of the given degree
/// over `R^dim`: one slot per nondecreasing index tuple.
pub fn space_dim(degree: usize, dim: usize) -> Result<usize> {
    if dim == 0 {
        return Err(Error::Domain("tensor dimension must be at least 1".into()));
    }
    if degree > ORDER_CAP || dim > ORDER_CAP {
        return Err(Error::Range(format!(
            "degree {degree} / dimension {dim} exceed the exact slot bound ({ORDER_CAP})"
        )));
    }
    Ok(binomial((degree + dim - 1) as u64, degree as u64) as usize)
}

/// Lexicographic position of a sorted index tuple among all nondecreasing
/// tuples of its length, via the shift to strictly increasing combinations.
fn slot(sorted: &[usize], dim: usize) -> usize {
    let n = sorted.len();
    if n == 0 {
        return 0;
    }
    let alphabet = dim + n - 1;
    let mut rank = 0;
    let mut prev = 0;
    for (k, &i) in sorted.iter().enumerate() {
        let shifted = i + k;
        for v in prev + 1..shifted {
            rank += binomial((alphabet - v) as u64, (n - k - 1) as u64) as usize;
        }
        prev = shifted;
    }
    rank
}

fn push_tuples(degree: usize, dim: usize, start: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if prefix.len() == degree {
        out.push(prefix.clone());
        return;
    }
    for i in start..=dim {
        prefix.push(i);
        push_tuples(degree, dim, i, prefix, out);
        prefix.pop();
    }
}

/// All nondecreasing index tuples of the given degree, in slot order.
fn enumerate_tuples(degree: usize, dim: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    push_tuples(degree, dim, 1, &mut Vec::with_capacity(degree), &mut out);
    out
}

/// A real tensor of the given degree over `R^dim`, symmetric under every
/// permutation of its indices. Storage holds one coefficient per sorted
/// index tuple; lookups with unsorted tuples resolve to that representative.
/// Index entries run from 1 to `dim`. Degree 0 is a single scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor {
    degree: usize,
    dim: usize,
    coeffs: Vec<f64>,
}

impl SymTensor {
    /// The zero tensor.
    pub fn zeros(degree: usize, dim: usize) -> Result<Self> {
        let m = space_dim(degree, dim)?;
        Ok(Self { degree, dim, coeffs: vec![0.0; m] })
    }

    /// A degree-0 tensor holding one scalar.
    pub fn scalar(dim: usize, value: f64) -> Result<Self> {
        let mut t = Self::zeros(0, dim)?;
        t.coeffs[0] = value;
        Ok(t)
    }

    /// Build from coefficients listed in slot order (nondecreasing tuples,
    /// lexicographically).
    pub fn from_coeffs(degree: usize, dim: usize, coeffs: Vec<f64>) -> Result<Self> {
        let m = space_dim(degree, dim)?;
        if coeffs.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "degree {degree} over R^{dim} has {m} slots, got {} coefficients",
                coeffs.len()
            )));
        }
        Ok(Self { degree, dim, coeffs })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Coefficients in slot order.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// The sorted index tuples in slot order, parallel to `coeffs`.
    pub fn index_tuples(&self) -> Vec<Vec<usize>> {
        enumerate_tuples(self.degree, self.dim)
    }

    fn slot_of(&self, index: &[usize]) -> usize {
        assert_eq!(
            index.len(),
            self.degree,
            "index tuple length {} does not match tensor degree {}",
            index.len(),
            self.degree
        );
        let mut sorted = index.to_vec();
        sorted.sort_unstable();
        if let (Some(&lo), Some(&hi)) = (sorted.first(), sorted.last()) {
            assert!(lo >= 1 && hi <= self.dim, "index entries must lie in 1..={}", self.dim);
        }
        slot(&sorted, self.dim)
    }

    /// Coefficient at an index tuple, in any order of its entries.
    pub fn get(&self, index: &[usize]) -> f64 {
        self.coeffs[self.slot_of(index)]
    }

    /// Overwrite the coefficient shared by all permutations of the tuple.
    pub fn set(&mut self, index: &[usize], value: f64) {
        let s = self.slot_of(index);
        self.coeffs[s] = value;
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            degree: self.degree,
            dim: self.dim,
            coeffs: self.coeffs.iter().map(|v| c * v).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.degree != other.degree || self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "cannot add degree {} over R^{} to degree {} over R^{}",
                self.degree, self.dim, other.degree, other.dim
            )));
        }
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(Self { degree: self.degree, dim: self.dim, coeffs })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// Largest coefficient magnitude over the distinct slots.
    pub fn sup_norm(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Euclidean norm of the distinct-slot coefficient vector.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// One CSV row per slot: the sorted index entries, then the value.
    /// Values print in shortest round-trip form. A degree-0 tensor is a
    /// single value-only row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (tuple, value) in self.index_tuples().iter().zip(&self.coeffs) {
            for i in tuple {
                out.push_str(&i.to_string());
                out.push(',');
            }
            out.push_str(&value.to_string());
            out.push('\n');
        }
        out
    }

    /// Parse the `to_csv` format. The degree is read off the first data row;
    /// every slot must appear exactly once. Blank lines and `#` comments are
    /// skipped.
    pub fn from_csv(text: &str, dim: usize) -> Result<Self> {
        let mut rows = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            rows.push((ln + 1, line.split(',').collect::<Vec<_>>()));
        }
        let Some((_, first)) = rows.first() else {
            return Err(Error::Config("tensor table has no data rows".into()));
        };
        let degree = first.len() - 1;
        let m = space_dim(degree, dim)?;
        if rows.len() != m {
            return Err(Error::Config(format!(
                "degree {degree} over R^{dim} needs {m} rows, found {}",
                rows.len()
            )));
        }
        let mut tensor = Self::zeros(degree, dim)?;
        let mut seen = vec![false; m];
        for (ln, parts) in rows {
            if parts.len() != degree + 1 {
                return Err(Error::Config(format!(
                    "line {ln}: expected {} comma-separated fields, found {}",
                    degree + 1,
                    parts.len()
                )));
            }
            let mut tuple = Vec::with_capacity(degree);
            for p in &parts[..degree] {
                let i: usize = p
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("line {ln}: bad index field {p:?}")))?;
                if i < 1 || i > dim {
                    return Err(Error::Config(format!(
                        "line {ln}: index {i} outside 1..={dim}"
                    )));
                }
                tuple.push(i);
            }
            let value: f64 = parts[degree]
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("line {ln}: bad value field {:?}", parts[degree])))?;
            let s = tensor.slot_of(&tuple);
            if seen[s] {
                return Err(Error::Config(format!(
                    "line {ln}: duplicate row for index tuple {tuple:?}"
                )));
            }
            seen[s] = true;
            tensor.coeffs[s] = value;
        }
        Ok(tensor)
    }
}

/// A nonzero direction in `R^d` that the ladder maps pair indices with.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionVector {
    components: Vec<f64>,
    norm_sq: f64,
}

impl DirectionVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Domain("direction needs at least one component".into()));
        }
        let norm_sq: f64 = components.iter().map(|v| v * v).sum();
        if norm_sq == 0.0 {
            return Err(Error::Domain("direction must have nonzero length".into()));
        }
        Ok(Self { components, norm_sq })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq.sqrt()
    }

    /// The direction scaled by `c`; rejects `c = 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.components.iter().map(|v| c * v).collect())
    }
}

fn check_dims(tensor: &SymTensor, t: &DirectionVector) -> Result<()> {
    if tensor.dim() != t.dim() {
        return Err(Error::DimensionMismatch(format!(
            "tensor over R^{} paired with a direction in R^{}",
            tensor.dim(),
            t.dim()
        )));
    }
    Ok(())
}

/// Lowering: pair one index with the direction. The output coefficient at a
/// tuple `beta` of degree n-1 is `sum_k psi(beta, k) t_k`.
///
/// Together with [`raise`] this satisfies, degree by degree,
/// `lower(raise(psi)) = |t|^2 psi + raise(lower(psi))`.
pub fn lower(psi: &SymTensor, t: &DirectionVector) -> Result<SymTensor> {
    check_dims(psi, t)?;
    if psi.degree() == 0 {
        return Err(Error::Domain(
            "cannot lower a degree-0 tensor; the ladder stops at scalars".into(),
        ));
    }
    let d = psi.dim();
    let tuples = enumerate_tuples(psi.degree() - 1, d);
    let tc = t.components();
    let mut coeffs = vec![0.0; tuples.len()];
    let mut buf = Vec::with_capacity(psi.degree());
    for (s, beta) in tuples.iter().enumerate() {
        let mut acc = 0.0;
        for k in 1..=d {
            buf.clear();
            buf.extend_from_slice(beta);
            buf.push(k);
            acc += psi.get(&buf) * tc[k - 1];
        }
        coeffs[s] = acc;
    }
    SymTensor::from_coeffs(psi.degree() - 1, d, coeffs)
}

/// Raising: the symmetrized product with the direction. The output at a
/// tuple of degree n+1 is the sum of the n+1 terms that drop one entry and
/// multiply by the direction component of the dropped entry.
pub fn raise(psi: &SymTensor, t: &DirectionVector) -> Result<SymTensor> {
    check_dims(psi, t)?;
    let out_degree = psi.degree() + 1;
    space_dim(out_degree, psi.dim())?;
    let tuples = enumerate_tuples(out_degree, psi.dim());
    let tc = t.components();
    let mut coeffs = vec![0.0; tuples.len()];
    let mut buf = Vec::with_capacity(psi.degree());
    for (s, alpha) in tuples.iter().enumerate() {
        let mut acc = 0.0;
        for j in 0..alpha.len() {
            buf.clear();
            buf.extend(alpha.iter().take(j));
            buf.extend(alpha.iter().skip(j + 1));
            acc += psi.get(&buf) * tc[alpha[j] - 1];
        }
        coeffs[s] = acc;
    }
    SymTensor::from_coeffs(out_degree, psi.dim(), coeffs)
}

/// Solve `lower(result, t) = f` one degree up, by the finite alternating
/// series whose k-th term is `(-1)^(k+1) (k!)^(-1) |t|^(-2k)` times k raises
/// of k-1 lowers of `f`. Any other solution differs by the kernel of the
/// lowering; this one obeys `|result| <= C |f| / |t|`.
pub fn solve_lowering(f: &SymTensor, t: &DirectionVector) -> Result<SymTensor> {
    check_dims(f, t)?;
    if t.norm() < NORM_FLOOR {
        return Err(Error::Conditioning(format!(
            "direction norm {:.3e} is too small to invert the lowering",
            t.norm()
        )));
    }
    let n = f.degree() + 1;
    let mut result = SymTensor::zeros(n, f.dim())?;
    let mut lowered = f.clone();
    let mut weight = 1.0;
    for k in 1..=n {
        weight *= k as f64 * t.norm_sq();
        let mut term = lowered.clone();
        for _ in 0..k {
            term = raise(&term, t)?;
        }
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        result = result.add(&term.scale(sign / weight))?;
        if k < n {
            lowered = lower(&lowered, t)?;
        }
    }
    Ok(result)
}
