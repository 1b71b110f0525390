//! Observable dictionaries, lifting/decoding and least-squares identification of the
//! nominal lifted model `z⁺ = A z + B u`, `x = C z`.
//!
//! Every dictionary is state-inclusive: the first `n` lifted coordinates are the
//! physical state itself, so the decoder is the fixed selector `C = [I_n 0]`.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RbfKernel {
    Gaussian,
    ThinPlate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DictionaryKind {
    /// All monomials of total degree `2..=degree` after the state itself.
    Polynomial { degree: usize },
    /// Radial basis functions of the scaled distance `‖(x - c) / scale‖ / width`.
    Rbf {
        kernel: RbfKernel,
        centers: Vec<Vec<f64>>,
        width: f64,
        scale: Vec<f64>,
    },
}

/// A fixed, state-inclusive lifting map `x ↦ z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableDictionary {
    n: usize,
    kind: DictionaryKind,
    /// Appends the constant observable `1` as the last lifted coordinate.
    constant: bool,
    #[serde(skip)]
    monomials: Vec<Vec<usize>>,
}

impl ObservableDictionary {
    pub fn polynomial(n: usize, degree: usize) -> Result<Self> {
        if n == 0 || degree == 0 {
            return Err(CoreError::InvalidParameter(
                "polynomial dictionary needs n >= 1 and degree >= 1".into(),
            ));
        }
        let mut dict = Self {
            n,
            kind: DictionaryKind::Polynomial { degree },
            constant: false,
            monomials: Vec::new(),
        };
        dict.rebuild();
        Ok(dict)
    }

    pub fn rbf(
        n: usize,
        kernel: RbfKernel,
        centers: Vec<Vec<f64>>,
        width: f64,
        scale: Vec<f64>,
    ) -> Result<Self> {
        if centers.iter().any(|c| c.len() != n) || scale.len() != n {
            return Err(CoreError::InvalidParameter(
                "rbf centers and scale must have length n".into(),
            ));
        }
        if !(width > 0.0) || scale.iter().any(|s| !(*s > 0.0)) {
            return Err(CoreError::InvalidParameter(
                "rbf width and scales must be positive".into(),
            ));
        }
        Ok(Self {
            n,
            kind: DictionaryKind::Rbf {
                kernel,
                centers,
                width,
                scale,
            },
            constant: false,
            monomials: Vec::new(),
        })
    }

    /// RBF dictionary with Latin-hypercube centers over `[lower, upper]`. Coordinates are
    /// scaled by the box widths and the kernel width is the median pairwise distance of
    /// the scaled centers.
    pub fn rbf_latin_hypercube<R: Rng + ?Sized>(
        lower: &[f64],
        upper: &[f64],
        count: usize,
        kernel: RbfKernel,
        rng: &mut R,
    ) -> Result<Self> {
        let n = lower.len();
        if upper.len() != n || n == 0 || count == 0 {
            return Err(CoreError::InvalidParameter(
                "rbf box must be nonempty with matching bounds and count >= 1".into(),
            ));
        }
        let scale: Vec<f64> = lower
            .iter()
            .zip(upper)
            .map(|(l, u)| if u > l { u - l } else { 1.0 })
            .collect();
        let centers = latin_hypercube(count, lower, upper, rng);
        let mut dists = Vec::new();
        for i in 0..count {
            for j in (i + 1)..count {
                let d2: f64 = (0..n)
                    .map(|d| ((centers[i][d] - centers[j][d]) / scale[d]).powi(2))
                    .sum();
                dists.push(d2.sqrt());
            }
        }
        let width = if dists.is_empty() {
            1.0
        } else {
            dists.sort_by(|a, b| a.total_cmp(b));
            let mid = dists.len() / 2;
            if dists.len() % 2 == 0 {
                0.5 * (dists[mid - 1] + dists[mid])
            } else {
                dists[mid]
            }
        };
        Self::rbf(n, kernel, centers, width.max(1e-9), scale)
    }

    pub fn with_constant(mut self, constant: bool) -> Self {
        self.constant = constant;
        self
    }

    fn rebuild(&mut self) {
        self.monomials.clear();
        if let DictionaryKind::Polynomial { degree } = self.kind {
            for d in 2..=degree {
                let mut idx = vec![0usize; d];
                loop {
                    self.monomials.push(idx.clone());
                    // next nondecreasing index tuple
                    let mut pos = d;
                    while pos > 0 && idx[pos - 1] == self.n - 1 {
                        pos -= 1;
                    }
                    if pos == 0 {
                        break;
                    }
                    idx[pos - 1] += 1;
                    let v = idx[pos - 1];
                    for slot in idx.iter_mut().skip(pos) {
                        *slot = v;
                    }
                }
            }
        }
    }

    /// Re-derives cached monomial tables after deserialization.
    pub fn restored(mut self) -> Self {
        self.rebuild();
        self
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &DictionaryKind {
        &self.kind
    }

    pub fn has_constant(&self) -> bool {
        self.constant
    }

    /// Lifted dimension `p`.
    pub fn lifted_dim(&self) -> usize {
        let extra = match &self.kind {
            DictionaryKind::Polynomial { .. } => self.monomials.len(),
            DictionaryKind::Rbf { centers, .. } => centers.len(),
        };
        self.n + extra + usize::from(self.constant)
    }

    /// Lifts a physical state.
    pub fn encode(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("encode", self.n, x.len())?;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(CoreError::NonFinite("encode input"));
        }
        let mut z = Vec::with_capacity(self.lifted_dim());
        z.extend(x.iter().copied());
        match &self.kind {
            DictionaryKind::Polynomial { .. } => {
                for mono in &self.monomials {
                    z.push(mono.iter().map(|&i| x[i]).product());
                }
            }
            DictionaryKind::Rbf {
                kernel,
                centers,
                width,
                scale,
            } => {
                for c in centers {
                    let r2: f64 = (0..self.n)
                        .map(|d| ((x[d] - c[d]) / scale[d]).powi(2))
                        .sum::<f64>()
                        / (width * width);
                    let phi = match kernel {
                        RbfKernel::Gaussian => (-r2).exp(),
                        RbfKernel::ThinPlate => {
                            if r2 <= 0.0 {
                                0.0
                            } else {
                                0.5 * r2 * r2.ln()
                            }
                        }
                    };
                    z.push(phi);
                }
            }
        }
        if self.constant {
            z.push(1.0);
        }
        let z = DVector::from_vec(z);
        if !z.iter().all(|v| v.is_finite()) {
            return Err(CoreError::NonFinite("encode output"));
        }
        Ok(z)
    }

    /// The selector decoder `[I_n 0]`.
    pub fn selector(&self) -> DMatrix<f64> {
        let p = self.lifted_dim();
        let mut c = DMatrix::zeros(self.n, p);
        for i in 0..self.n {
            c[(i, i)] = 1.0;
        }
        c
    }
}

/// `C z`.
pub fn decode(z: &DVector<f64>, c: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_len("decode", c.ncols(), z.len())?;
    Ok(c * z)
}

/// Latin-hypercube sample of `count` points in the box `[lower, upper]`.
pub fn latin_hypercube<R: Rng + ?Sized>(
    count: usize,
    lower: &[f64],
    upper: &[f64],
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let n = lower.len();
    let mut points = vec![vec![0.0; n]; count];
    for d in 0..n {
        let mut strata: Vec<usize> = (0..count).collect();
        strata.shuffle(rng);
        for (i, &s) in strata.iter().enumerate() {
            let u = (s as f64 + rng.random::<f64>()) / count as f64;
            points[i][d] = lower[d] + u * (upper[d] - lower[d]);
        }
    }
    points
}

/// Columns of `y` are one-step successors of the columns of `x` under the same column
/// of `u`.
#[derive(Debug, Clone)]
pub struct TrainingBatch {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub u: DMatrix<f64>,
}

impl TrainingBatch {
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>, u: DMatrix<f64>) -> Result<Self> {
        check_len("batch successor rows", x.nrows(), y.nrows())?;
        check_len("batch successor columns", x.ncols(), y.ncols())?;
        check_len("batch input columns", x.ncols(), u.ncols())?;
        Ok(Self { x, y, u })
    }

    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }
}

/// The nominal lifted model identified offline.
#[derive(Debug, Clone, PartialEq)]
pub struct NominalModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub dictionary: ObservableDictionary,
}

impl NominalModel {
    pub fn state_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn lifted_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// Stacked operator `[A B]`.
    pub fn stacked(&self) -> DMatrix<f64> {
        let p = self.lifted_dim();
        let m = self.input_dim();
        let mut w = DMatrix::zeros(p, p + m);
        w.view_mut((0, 0), (p, p)).copy_from(&self.a);
        w.view_mut((0, p), (p, m)).copy_from(&self.b);
        w
    }

    /// `‖Z⁺ − [A B][Z; U]‖_F` on a batch.
    pub fn residual(&self, batch: &TrainingBatch) -> Result<f64> {
        let (psi, z_next) = lifted_regression(batch, &self.dictionary)?;
        Ok((z_next - self.stacked() * psi).norm())
    }

    /// Text serialization: a header with dimensions and the dictionary descriptor,
    /// followed by the `A`, `B`, `C` blocks as comma-separated rows.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# koopact nominal model v1\n");
        out.push_str(&format!("n,{}\n", self.state_dim()));
        out.push_str(&format!("m,{}\n", self.input_dim()));
        out.push_str(&format!("p,{}\n", self.lifted_dim()));
        let dict = serde_json::to_string(&self.dictionary).expect("dictionary serializes");
        out.push_str(&format!("dict,{dict}\n"));
        for (name, mat) in [("A", &self.a), ("B", &self.b), ("C", &self.c)] {
            out.push_str(&format!("{name},{},{}\n", mat.nrows(), mat.ncols()));
            for r in 0..mat.nrows() {
                let row: Vec<String> = (0..mat.ncols()).map(|c| format!("{:e}", mat[(r, c)])).collect();
                out.push_str(&row.join(","));
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| CoreError::ModelFormat(msg.to_string());
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let mut header = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad("truncated header"))?;
            let (k, v) = line.split_once(',').ok_or_else(|| bad("malformed header line"))?;
            if k != key {
                return Err(bad(&format!("expected header key {key}, found {k}")));
            }
            Ok(v.to_string())
        };
        let n: usize = header("n")?.parse().map_err(|_| bad("n"))?;
        let m: usize = header("m")?.parse().map_err(|_| bad("m"))?;
        let p: usize = header("p")?.parse().map_err(|_| bad("p"))?;
        let dict: ObservableDictionary =
            serde_json::from_str(&header("dict")?).map_err(|e| bad(&e.to_string()))?;
        let dictionary = dict.restored();
        let mut read_block = |name: &str, rows: usize, cols: usize| -> Result<DMatrix<f64>> {
            let head = lines.next().ok_or_else(|| bad("missing block"))?;
            let parts: Vec<&str> = head.split(',').collect();
            if parts.len() != 3 || parts[0] != name {
                return Err(bad(&format!("expected block {name}")));
            }
            let (r, c): (usize, usize) = (
                parts[1].parse().map_err(|_| bad("rows"))?,
                parts[2].parse().map_err(|_| bad("cols"))?,
            );
            if r != rows || c != cols {
                return Err(bad(&format!("block {name} has shape {r}x{c}, expected {rows}x{cols}")));
            }
            let mut mat = DMatrix::zeros(rows, cols);
            for i in 0..rows {
                let line = lines.next().ok_or_else(|| bad("truncated block"))?;
                let vals: Vec<f64> = line
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("matrix entry"))?;
                if vals.len() != cols {
                    return Err(bad("row length"));
                }
                for (j, v) in vals.into_iter().enumerate() {
                    mat[(i, j)] = v;
                }
            }
            Ok(mat)
        };
        let a = read_block("A", p, p)?;
        let b = read_block("B", p, m)?;
        let c = read_block("C", n, p)?;
        if dictionary.state_dim() != n || dictionary.lifted_dim() != p {
            return Err(bad("dictionary dimensions disagree with header"));
        }
        Ok(Self {
            a,
            b,
            c,
            dictionary,
        })
    }
}

/// Builds the regressor matrix `[Z; U]` and target matrix `Z⁺` of a batch.
pub fn lifted_regression(
    batch: &TrainingBatch,
    dict: &ObservableDictionary,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_len("batch state rows", dict.state_dim(), batch.x.nrows())?;
    let p = dict.lifted_dim();
    let m = batch.u.nrows();
    let count = batch.len();
    let mut psi = DMatrix::zeros(p + m, count);
    let mut z_next = DMatrix::zeros(p, count);
    for j in 0..count {
        let z = dict.encode(&batch.x.column(j).into_owned())?;
        let zn = dict.encode(&batch.y.column(j).into_owned())?;
        psi.view_mut((0, j), (p, 1)).copy_from(&z);
        psi.view_mut((p, j), (m, 1)).copy_from(&batch.u.column(j));
        z_next.set_column(j, &zn);
    }
    Ok((psi, z_next))
}

/// Fits `[A B]` minimizing `‖Z⁺ − [A B][Z; U]‖_F² + ridge‖[A B]‖_F²`.
pub fn identify_nominal(
    batch: &TrainingBatch,
    dict: &ObservableDictionary,
    ridge: f64,
) -> Result<NominalModel> {
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(CoreError::InvalidParameter("ridge must be a finite nonnegative scalar".into()));
    }
    let (psi, z_next) = lifted_regression(batch, dict)?;
    let p = dict.lifted_dim();
    let m = batch.u.nrows();
    let d = p + m;
    let count = batch.len();
    if ridge == 0.0 && count < d {
        return Err(CoreError::Identifiability(format!(
            "{count} samples for {d} regressors without ridge"
        )));
    }
    // Least squares on the augmented system [Ψᵀ; √ridge I] Wᵀ = [Z⁺ᵀ; 0].
    let rows = count + if ridge > 0.0 { d } else { 0 };
    let mut lhs = DMatrix::zeros(rows, d);
    let mut rhs = DMatrix::zeros(rows, p);
    lhs.view_mut((0, 0), (count, d)).copy_from(&psi.transpose());
    rhs.view_mut((0, 0), (count, p)).copy_from(&z_next.transpose());
    if ridge > 0.0 {
        let s = ridge.sqrt();
        for i in 0..d {
            lhs[(count + i, i)] = s;
        }
    }
    let svd = lhs.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if ridge == 0.0 && (smax == 0.0 || smin <= 1e-12 * smax) {
        return Err(CoreError::Identifiability(format!(
            "regressor matrix is rank deficient (σ_min/σ_max = {:.3e})",
            if smax > 0.0 { smin / smax } else { 0.0 }
        )));
    }
    let w_t = svd
        .solve(&rhs, 0.0)
        .map_err(|e| CoreError::Identifiability(e.to_string()))?;
    let w = w_t.transpose();
    let a = w.view((0, 0), (p, p)).into_owned();
    let b = w.view((0, p), (p, m)).into_owned();
    Ok(NominalModel {
        a,
        b,
        c: dict.selector(),
        dictionary: dict.clone(),
    })
}
