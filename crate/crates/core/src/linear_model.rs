//! Data model shared by every solver: the dictionary `X`, the indicator
//! targets `Y`, coefficient matrices and supports, plus the linear
//! prediction, loss and sparsity measures defined on them.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{check_dim, Error, Result};

/// Default threshold used by [`row_l0_eps`] when extracting supports from
/// solver output.
pub const DEFAULT_ROW_EPS: f64 = 1e-10;

/// Dense `N x d` matrix with one feature vector per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
}

impl DataMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, d) = values.dim();
        if n == 0 || d == 0 {
            return Err(Error::invalid(format!(
                "data matrix must be non-empty, got {n}x{d}"
            )));
        }
        if let Some(((i, j), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "data matrix entry ({i}, {j}) is not finite: {v}"
            )));
        }
        // Row-major storage is assumed by the solvers' row sweeps.
        let values = if values.is_standard_layout() {
            values
        } else {
            values.as_standard_layout().into_owned()
        };
        Ok(Self { values })
    }

    pub fn from_shape_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        let values = Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| Error::invalid(format!("bad matrix shape {rows}x{cols}: {e}")))?;
        Self::new(values)
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    /// Strided view of feature column `j` (a dictionary atom).
    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }

    pub fn column_means(&self) -> Array1<f64> {
        self.values
            .mean_axis(Axis(0))
            .expect("data matrix has at least one row")
    }

    /// Copies the listed columns, in the given order, into an `N x k` matrix.
    pub fn select_columns(&self, cols: &[usize]) -> Array2<f64> {
        self.values.select(Axis(1), cols)
    }

    /// Copies the listed rows (samples) into a new data matrix.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        Self::new(self.values.select(Axis(0), rows))
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.values
    }
}

/// `N x L` 0/1 matrix marking which samples belong to which enrolled class.
/// Samples from unknown (background) people are all-zero rows.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorResponse {
    matrix: Array2<f64>,
    class_counts: Vec<usize>,
}

/// Builds the indicator matrix from per-sample labels, `None` meaning a
/// background sample that belongs to no class.
pub fn build_indicator(labels: &[Option<usize>], n_classes: usize) -> Result<IndicatorResponse> {
    if labels.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    if n_classes == 0 {
        return Err(Error::invalid("number of classes must be at least 1"));
    }
    let mut matrix = Array2::zeros((labels.len(), n_classes));
    let mut counts = vec![0usize; n_classes];
    for (i, label) in labels.iter().enumerate() {
        if let Some(class) = *label {
            if class >= n_classes {
                return Err(Error::invalid(format!(
                    "class id {class} of sample {i} out of range [0, {n_classes})"
                )));
            }
            matrix[[i, class]] = 1.0;
            counts[class] += 1;
        }
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::invalid(format!(
            "class with zero positives: class {empty}"
        )));
    }
    Ok(IndicatorResponse {
        matrix,
        class_counts: counts,
    })
}

impl IndicatorResponse {
    /// Validates an explicit 0/1 matrix.
    pub fn from_matrix(matrix: Array2<f64>) -> Result<Self> {
        let labels = matrix
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                let mut label = None;
                for (l, &v) in row.iter().enumerate() {
                    if v == 1.0 {
                        if label.is_some() {
                            return Err(Error::invalid(format!(
                                "indicator row {i} has more than one positive entry"
                            )));
                        }
                        label = Some(l);
                    } else if v != 0.0 {
                        return Err(Error::invalid(format!(
                            "indicator entry ({i}, {l}) is {v}, expected 0 or 1"
                        )));
                    }
                }
                Ok(label)
            })
            .collect::<Result<Vec<_>>>()?;
        build_indicator(&labels, matrix.ncols())
    }

    pub fn n_samples(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_tasks(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }

    pub fn column(&self, l: usize) -> ArrayView1<'_, f64> {
        self.matrix.column(l)
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    /// Per-task loss weights `1 / N_l`.
    pub fn task_weights(&self) -> Vec<f64> {
        self.class_counts.iter().map(|&c| 1.0 / c as f64).collect()
    }

    /// Recovers the per-sample labels (`None` for background rows).
    pub fn labels(&self) -> Vec<Option<usize>> {
        self.matrix
            .rows()
            .into_iter()
            .map(|row| row.iter().position(|&v| v == 1.0))
            .collect()
    }

    /// Keeps a subset of the tasks, in the given order.
    pub fn select_tasks(&self, tasks: &[usize]) -> Result<Self> {
        for &t in tasks {
            if t >= self.n_tasks() {
                return Err(Error::invalid(format!("task {t} out of range")));
            }
        }
        Self::from_matrix(self.matrix.select(Axis(1), tasks))
    }
}

/// `d x L` weights (one column per task) plus one bias per task.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    weights: Array2<f64>,
    biases: Array1<f64>,
}

impl CoefficientMatrix {
    pub fn zeros(n_features: usize, n_tasks: usize) -> Self {
        Self {
            weights: Array2::zeros((n_features, n_tasks)),
            biases: Array1::zeros(n_tasks),
        }
    }

    pub fn new(weights: Array2<f64>, biases: Array1<f64>) -> Result<Self> {
        check_dim("bias count vs weight columns", weights.ncols(), biases.len())?;
        if weights.iter().chain(biases.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numerical(
                "coefficient matrix contains non-finite entries".into(),
            ));
        }
        Ok(Self { weights, biases })
    }

    pub fn n_features(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_tasks(&self) -> usize {
        self.weights.ncols()
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn biases(&self) -> ArrayView1<'_, f64> {
        self.biases.view()
    }

    /// Column `c_l`.
    pub fn task(&self, l: usize) -> ArrayView1<'_, f64> {
        self.weights.column(l)
    }

    /// Row `c^i`, the weights of feature `i` across tasks.
    pub fn feature(&self, i: usize) -> ArrayView1<'_, f64> {
        self.weights.row(i)
    }

    pub fn into_parts(self) -> (Array2<f64>, Array1<f64>) {
        (self.weights, self.biases)
    }
}

/// Ordered, duplicate-free list of selected feature indices. The order is
/// the selection order for greedy solvers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SupportSet {
    indices: Vec<usize>,
}

impl SupportSet {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("duplicate support index {}", w[0])));
        }
        Ok(Self { indices })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn push(&mut self, index: usize) -> Result<()> {
        if self.contains(index) {
            return Err(Error::invalid(format!("duplicate support index {index}")));
        }
        self.indices.push(index);
        Ok(())
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.contains(&index)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn sorted(&self) -> Vec<usize> {
        let mut s = self.indices.clone();
        s.sort_unstable();
        s
    }

    pub fn check_bound(&self, n_features: usize) -> Result<()> {
        match self.indices.iter().find(|&&i| i >= n_features) {
            Some(i) => Err(Error::invalid(format!(
                "support index {i} out of range [0, {n_features})"
            ))),
            None => Ok(()),
        }
    }
}

/// Scores `x_i . c_l + b_l` for every sample and task.
pub fn predict(x: &DataMatrix, coef: &CoefficientMatrix) -> Result<Array2<f64>> {
    check_dim("feature count", coef.n_features(), x.cols())?;
    let mut scores = x.view().dot(&coef.weights);
    scores += &coef.biases;
    Ok(scores)
}

/// `||y - X c - b 1||^2`.
pub fn squared_error(x: &DataMatrix, y: ArrayView1<f64>, c: ArrayView1<f64>, b: f64) -> Result<f64> {
    check_dim("response length", x.rows(), y.len())?;
    check_dim("coefficient length", x.cols(), c.len())?;
    let fitted = x.view().dot(&c);
    Ok(y
        .iter()
        .zip(fitted.iter())
        .map(|(&yi, &fi)| {
            let r = yi - fi - b;
            r * r
        })
        .sum())
}

/// `sum_l (1 / N_l) Err(c_l, b_l)`.
pub fn multitask_loss(x: &DataMatrix, y: &IndicatorResponse, coef: &CoefficientMatrix) -> Result<f64> {
    check_dim("response rows", x.rows(), y.n_samples())?;
    check_dim("task count", y.n_tasks(), coef.n_tasks())?;
    let weights = y.task_weights();
    let mut total = 0.0;
    for (l, w) in weights.iter().enumerate() {
        total += w * squared_error(x, y.column(l), coef.task(l), coef.biases[l])?;
    }
    Ok(total)
}

/// Number of rows with any nonzero entry (exact zero test).
pub fn row_l0(coef: &CoefficientMatrix) -> usize {
    row_l0_eps(coef, 0.0)
}

/// Number of rows whose largest magnitude exceeds `eps`.
pub fn row_l0_eps(coef: &CoefficientMatrix, eps: f64) -> usize {
    coef.weights
        .rows()
        .into_iter()
        .filter(|row| row.iter().any(|v| v.abs() > eps))
        .count()
}

/// `l_q` norm of a vector; `q = inf` gives the max magnitude.
pub fn lq_norm(v: ArrayView1<f64>, q: f64) -> f64 {
    if q.is_infinite() {
        v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    } else if q == 2.0 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    } else if q == 1.0 {
        v.iter().map(|x| x.abs()).sum()
    } else {
        v.iter().map(|x| x.abs().powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

/// The `l_{p,q}` row-mixed norm `sum_i ||c^i||_q^p` with `0 < p <= 1 < q <= inf`.
pub fn mixed_norm(coef: &CoefficientMatrix, p: f64, q: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!("p must lie in (0, 1], got {p}")));
    }
    if q.is_nan() || q <= 1.0 {
        return Err(Error::invalid(format!("q must lie in (1, inf], got {q}")));
    }
    Ok(coef
        .weights
        .rows()
        .into_iter()
        .map(|row| {
            let n = lq_norm(row, q);
            if p == 1.0 {
                n
            } else {
                n.powf(p)
            }
        })
        .sum())
}
