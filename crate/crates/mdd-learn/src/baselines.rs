//! Global and divide-and-conquer trainers for ridge and kernel ridge
//! regression.
//!
//! Every trainer reduces a shard to the same regularized system: factor
//! `A_i` once, solve for the local weights, and (for the divide-and-conquer
//! variants) average the local models in shard-index order. The per-shard
//! builders here are shared with the max-diversity trainers in [`crate::mdd`]
//! so that the zero-strength reductions agree coefficient for coefficient.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{gather_shards, Dataset, Partition};
use crate::linalg::{
    kernel_matrix, linear_gram, mean_vectors, spd_factorize, KernelConfig, LinalgError, SpdFactor,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("shard {0} is empty")]
    EmptyShard(usize),
    #[error("feature dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model file is invalid: {0}")]
    BadModel(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A linear predictor `f(x) = w^T x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub w: Array1<f64>,
}

impl LinearModel {
    /// Predict for samples given as rows of `x`.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>, TrainError> {
        if x.ncols() != self.w.len() {
            return Err(TrainError::DimensionMismatch {
                expected: self.w.len(),
                got: x.ncols(),
            });
        }
        Ok(x.dot(&self.w))
    }
}

/// One shard of a kernel model: its anchor samples and their coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelShard {
    /// `n_i x d` anchor rows.
    pub anchors: Array2<f64>,
    pub coeffs: Array1<f64>,
}

/// Kernel predictor averaging `m` per-shard expansions:
/// `f(x) = (1/m) sum_i sum_j coeffs_i[j] K(anchors_i[j], x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShardedKernelModel {
    pub shards: Vec<KernelShard>,
    pub kernel: KernelConfig,
}

impl ShardedKernelModel {
    pub fn dim(&self) -> usize {
        self.shards.first().map(|s| s.anchors.ncols()).unwrap_or(0)
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>, TrainError> {
        if self.shards.is_empty() {
            return Err(TrainError::EmptyDataset);
        }
        if x.ncols() != self.dim() {
            return Err(TrainError::DimensionMismatch {
                expected: self.dim(),
                got: x.ncols(),
            });
        }
        let mut acc = Array1::<f64>::zeros(x.nrows());
        for shard in &self.shards {
            let k = kernel_matrix(x, shard.anchors.view(), &self.kernel)?;
            acc += &k.dot(&shard.coeffs);
        }
        Ok(acc / self.shards.len() as f64)
    }
}

/// Factored per-shard linear system: `A = (1/n) X X^T + lambda I`,
/// `b = (1/n) X y`, and the local solution `w0 = A^{-1} b`.
pub(crate) struct LinearSystem {
    pub factor: SpdFactor,
    pub b: Array1<f64>,
    pub w0: Array1<f64>,
}

pub(crate) fn solve_linear_shard(
    x_rows: ArrayView2<f64>,
    y: ArrayView1<f64>,
    lambda: f64,
) -> Result<LinearSystem, TrainError> {
    let (a, b) = linear_gram(x_rows.t(), y, lambda)?;
    let factor = spd_factorize(a.view())?;
    let w0 = factor.solve(b.view())?;
    Ok(LinearSystem { factor, b, w0 })
}

/// Factored per-shard kernel system: `A = (1/n) K + lambda I`,
/// `b = (1/n) y`, plus the shard's own kernel block for reuse.
pub(crate) struct KernelSystem {
    pub factor: SpdFactor,
    pub b: Array1<f64>,
    pub w0: Array1<f64>,
    pub anchors: Array2<f64>,
    pub kii: Array2<f64>,
}

pub(crate) fn solve_kernel_shard(
    anchors: Array2<f64>,
    y: ArrayView1<f64>,
    lambda: f64,
    cfg: &KernelConfig,
) -> Result<KernelSystem, TrainError> {
    let n = anchors.nrows();
    if n == 0 {
        return Err(TrainError::EmptyDataset);
    }
    if lambda <= 0.0 {
        return Err(TrainError::Linalg(LinalgError::NonPositiveLambda(lambda)));
    }
    let kii = kernel_matrix(anchors.view(), anchors.view(), cfg)?;
    let inv_n = 1.0 / n as f64;
    let mut a = kii.clone();
    a.mapv_inplace(|v| v * inv_n);
    for i in 0..n {
        a[[i, i]] += lambda;
    }
    let factor = spd_factorize(a.view())?;
    let b = y.mapv(|v| v * inv_n);
    let w0 = factor.solve(b.view())?;
    Ok(KernelSystem {
        factor,
        b,
        w0,
        anchors,
        kii,
    })
}

/// Global ridge regression: `w = A^{-1} b` over the full dataset.
pub fn train_rr(ds: &Dataset, lambda: f64) -> Result<LinearModel, TrainError> {
    if ds.n_samples() == 0 {
        return Err(TrainError::EmptyDataset);
    }
    let system = solve_linear_shard(ds.features(), ds.targets(), lambda)?;
    Ok(LinearModel { w: system.w0 })
}

/// Divide-and-conquer ridge regression: solve each shard locally and return
/// the uniform average along with the per-shard models.
pub fn train_drr(
    ds: &Dataset,
    part: &Partition,
    lambda: f64,
) -> Result<(LinearModel, Vec<LinearModel>), TrainError> {
    let shards = gather_shards(ds, part);
    let mut locals = Vec::with_capacity(shards.len());
    for (i, (x, y)) in shards.iter().enumerate() {
        if x.nrows() == 0 {
            return Err(TrainError::EmptyShard(i));
        }
        let system = solve_linear_shard(x.view(), y.view(), lambda)?;
        locals.push(system.w0);
    }
    let mean = mean_vectors(&locals);
    Ok((
        LinearModel { w: mean },
        locals.into_iter().map(|w| LinearModel { w }).collect(),
    ))
}

/// Global kernel ridge regression (a single shard holding every sample).
pub fn train_krr(
    ds: &Dataset,
    lambda: f64,
    cfg: &KernelConfig,
) -> Result<ShardedKernelModel, TrainError> {
    if ds.n_samples() == 0 {
        return Err(TrainError::EmptyDataset);
    }
    let system = solve_kernel_shard(ds.features().to_owned(), ds.targets(), lambda, cfg)?;
    Ok(ShardedKernelModel {
        shards: vec![KernelShard {
            anchors: system.anchors,
            coeffs: system.w0,
        }],
        kernel: cfg.clone(),
    })
}

/// Divide-and-conquer kernel ridge regression: per-shard KRR, prediction
/// averages the shard predictors.
pub fn train_kdrr(
    ds: &Dataset,
    part: &Partition,
    lambda: f64,
    cfg: &KernelConfig,
) -> Result<ShardedKernelModel, TrainError> {
    let shards = gather_shards(ds, part);
    let mut out = Vec::with_capacity(shards.len());
    for (i, (anchors, y)) in shards.into_iter().enumerate() {
        if anchors.nrows() == 0 {
            return Err(TrainError::EmptyShard(i));
        }
        let system = solve_kernel_shard(anchors, y.view(), lambda, cfg)?;
        out.push(KernelShard {
            anchors: system.anchors,
            coeffs: system.w0,
        });
    }
    Ok(ShardedKernelModel {
        shards: out,
        kernel: cfg.clone(),
    })
}

/// A trained model of either family, as written to and read from model JSON.
///
/// Linear models keep their per-shard weight vectors (one entry for the
/// global trainers); prediction averages the shard predictions, which for
/// linear models equals predicting with the averaged weights.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Linear {
        lambda: f64,
        shards: Vec<LinearModel>,
    },
    Kernel {
        lambda: f64,
        model: ShardedKernelModel,
    },
}

impl TrainedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            TrainedModel::Linear { .. } => "linear",
            TrainedModel::Kernel { .. } => "kernel",
        }
    }

    pub fn lambda(&self) -> f64 {
        match self {
            TrainedModel::Linear { lambda, .. } => *lambda,
            TrainedModel::Kernel { lambda, .. } => *lambda,
        }
    }

    /// Average weight vector of a linear model (the deployed predictor).
    pub fn mean_weights(&self) -> Option<Array1<f64>> {
        match self {
            TrainedModel::Linear { shards, .. } if !shards.is_empty() => {
                let ws: Vec<Array1<f64>> = shards.iter().map(|s| s.w.clone()).collect();
                Some(mean_vectors(&ws))
            }
            _ => None,
        }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>, TrainError> {
        match self {
            TrainedModel::Linear { shards, .. } => {
                let w = self.mean_weights().ok_or(TrainError::EmptyDataset)?;
                LinearModel { w }.predict(x).map_err(|e| match e {
                    TrainError::DimensionMismatch { got, .. } => TrainError::DimensionMismatch {
                        expected: shards[0].w.len(),
                        got,
                    },
                    other => other,
                })
            }
            TrainedModel::Kernel { model, .. } => model.predict(x),
        }
    }

    pub fn to_json(&self) -> Result<String, TrainError> {
        Ok(serde_json::to_string_pretty(&ModelFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self, TrainError> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.try_into()
    }
}

/// On-disk JSON layout. Field names are part of the CLI contract:
/// `{kind, lambda, sigma?, shards: [{w} | {anchors, coeffs}]}`.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    kind: String,
    lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    shards: Vec<ShardEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ShardEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    w: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    anchors: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coeffs: Option<Vec<f64>>,
}

impl From<&TrainedModel> for ModelFile {
    fn from(model: &TrainedModel) -> Self {
        match model {
            TrainedModel::Linear { lambda, shards } => ModelFile {
                kind: "linear".into(),
                lambda: *lambda,
                sigma: None,
                shards: shards
                    .iter()
                    .map(|s| ShardEntry {
                        w: Some(s.w.to_vec()),
                        anchors: None,
                        coeffs: None,
                    })
                    .collect(),
            },
            TrainedModel::Kernel { lambda, model } => ModelFile {
                kind: "kernel".into(),
                lambda: *lambda,
                sigma: model.kernel.bandwidth(),
                shards: model
                    .shards
                    .iter()
                    .map(|s| ShardEntry {
                        w: None,
                        anchors: Some(s.anchors.rows().into_iter().map(|r| r.to_vec()).collect()),
                        coeffs: Some(s.coeffs.to_vec()),
                    })
                    .collect(),
            },
        }
    }
}

impl TryFrom<ModelFile> for TrainedModel {
    type Error = TrainError;

    fn try_from(file: ModelFile) -> Result<Self, TrainError> {
        match file.kind.as_str() {
            "linear" => {
                let mut shards = Vec::with_capacity(file.shards.len());
                let mut dim = None;
                for (i, entry) in file.shards.into_iter().enumerate() {
                    let w = entry
                        .w
                        .ok_or_else(|| TrainError::BadModel(format!("shard {i}: missing 'w'")))?;
                    if *dim.get_or_insert(w.len()) != w.len() {
                        return Err(TrainError::BadModel("inconsistent weight lengths".into()));
                    }
                    shards.push(LinearModel {
                        w: Array1::from_vec(w),
                    });
                }
                if shards.is_empty() {
                    return Err(TrainError::BadModel("model has no shards".into()));
                }
                Ok(TrainedModel::Linear {
                    lambda: file.lambda,
                    shards,
                })
            }
            "kernel" => {
                let kernel = match file.sigma {
                    Some(sigma) => {
                        KernelConfig::gaussian(sigma).map_err(|e| TrainError::BadModel(e.to_string()))?
                    }
                    None => KernelConfig::LinearDot,
                };
                let mut shards = Vec::with_capacity(file.shards.len());
                let mut dim = None;
                for (i, entry) in file.shards.into_iter().enumerate() {
                    let anchors = entry.anchors.ok_or_else(|| {
                        TrainError::BadModel(format!("shard {i}: missing 'anchors'"))
                    })?;
                    let coeffs = entry.coeffs.ok_or_else(|| {
                        TrainError::BadModel(format!("shard {i}: missing 'coeffs'"))
                    })?;
                    let n = anchors.len();
                    if coeffs.len() != n {
                        return Err(TrainError::BadModel(format!(
                            "shard {i}: {n} anchors but {} coefficients",
                            coeffs.len()
                        )));
                    }
                    let d = anchors.first().map(|r| r.len()).unwrap_or(0);
                    if n == 0 || d == 0 || anchors.iter().any(|r| r.len() != d) {
                        return Err(TrainError::BadModel(format!("shard {i}: ragged anchors")));
                    }
                    if *dim.get_or_insert(d) != d {
                        return Err(TrainError::BadModel("inconsistent anchor dimensions".into()));
                    }
                    let flat: Vec<f64> = anchors.into_iter().flatten().collect();
                    shards.push(KernelShard {
                        anchors: Array2::from_shape_vec((n, d), flat)
                            .map_err(|e| TrainError::BadModel(e.to_string()))?,
                        coeffs: Array1::from_vec(coeffs),
                    });
                }
                if shards.is_empty() {
                    return Err(TrainError::BadModel("model has no shards".into()));
                }
                Ok(TrainedModel::Kernel {
                    lambda: file.lambda,
                    model: ShardedKernelModel { shards, kernel },
                })
            }
            other => Err(TrainError::BadModel(format!("unknown model kind '{other}'"))),
        }
    }
}
