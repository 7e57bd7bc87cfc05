use mte_core::kernel_mte::CurvatureSign;
use mte_core::{KernelFamily, Method, MteResult64};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatesRecord {
    pub theta1: f64,
    pub theta0: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SesRecord {
    pub theta1: f64,
    pub theta0: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CisRecord {
    pub theta1: [f64; 2],
    pub theta0: [f64; 2],
    pub delta: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceRecord {
    pub m1_hat: f64,
    pub m0_hat: f64,
    pub v1_hat: f64,
    pub v0_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub flat_curve: bool,
    #[serde(default)]
    pub multimodal_curve: bool,
    pub m_hat_sign: Option<CurvatureSign>,
    pub fold_reseeds: usize,
    pub warnings: Vec<String>,
}

/// The JSON document written by `mte estimate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: String,
    pub method: Method,
    pub kernel: KernelFamily,
    pub n: usize,
    pub h: f64,
    #[serde(rename = "K")]
    pub folds: Option<usize>,
    pub alpha: f64,
    pub estimates: EstimatesRecord,
    pub ses: SesRecord,
    pub cis: CisRecord,
    pub variance_components: VarianceRecord,
    pub diagnostics: DiagnosticsRecord,
    pub timing_ms: f64,
}

impl ResultRecord {
    pub fn from_result(r: &MteResult64, timing_ms: f64) -> Self {
        let d = &r.diagnostics;
        ResultRecord {
            schema_version: SCHEMA_VERSION.into(),
            method: r.method,
            kernel: r.kernel,
            n: r.n,
            h: r.h,
            folds: r.folds,
            alpha: r.alpha,
            estimates: EstimatesRecord { theta1: r.theta1, theta0: r.theta0, delta: r.delta },
            ses: SesRecord { theta1: r.se1, theta0: r.se0, delta: r.se_delta },
            cis: CisRecord {
                theta1: [r.ci1.0, r.ci1.1],
                theta0: [r.ci0.0, r.ci0.1],
                delta: [r.ci_delta.0, r.ci_delta.1],
            },
            variance_components: VarianceRecord {
                m1_hat: r.m1_hat,
                m0_hat: r.m0_hat,
                v1_hat: r.v1_hat,
                v0_hat: r.v0_hat,
            },
            diagnostics: DiagnosticsRecord {
                flat_curve: d.flat_curve,
                multimodal_curve: d.multimodal_curve,
                m_hat_sign: d.m_hat_sign,
                fold_reseeds: d.fold_reseeds,
                warnings: d.warnings.clone(),
            },
            timing_ms,
        }
    }

    /// Key/value rows for the plain-text table.
    pub fn table_rows(&self) -> Vec<(String, String)> {
        let ci = |c: [f64; 2]| format!("[{:.6}, {:.6}]", c[0], c[1]);
        let mut rows = vec![
            ("method".to_string(), serde_plain(&self.method)),
            ("kernel".into(), serde_plain(&self.kernel)),
            ("n".into(), self.n.to_string()),
            ("h".into(), format!("{:.6}", self.h)),
        ];
        if let Some(k) = self.folds {
            rows.push(("K".into(), k.to_string()));
        }
        rows.extend([
            ("theta1".into(), format!("{:.6}", self.estimates.theta1)),
            ("theta0".into(), format!("{:.6}", self.estimates.theta0)),
            ("delta".into(), format!("{:.6}", self.estimates.delta)),
            ("se(theta1)".into(), format!("{:.6}", self.ses.theta1)),
            ("se(theta0)".into(), format!("{:.6}", self.ses.theta0)),
            ("se(delta)".into(), format!("{:.6}", self.ses.delta)),
            (format!("ci{:.0}(theta1)", 100.0 * (1.0 - self.alpha)), ci(self.cis.theta1)),
            (format!("ci{:.0}(theta0)", 100.0 * (1.0 - self.alpha)), ci(self.cis.theta0)),
            (format!("ci{:.0}(delta)", 100.0 * (1.0 - self.alpha)), ci(self.cis.delta)),
            ("m1_hat".into(), format!("{:.6e}", self.variance_components.m1_hat)),
            ("m0_hat".into(), format!("{:.6e}", self.variance_components.m0_hat)),
            ("v1_hat".into(), format!("{:.6e}", self.variance_components.v1_hat)),
            ("v0_hat".into(), format!("{:.6e}", self.variance_components.v0_hat)),
            ("timing_ms".into(), format!("{:.1}", self.timing_ms)),
        ]);
        for w in &self.diagnostics.warnings {
            rows.push(("warning".into(), w.clone()));
        }
        rows
    }
}

fn serde_plain<S: Serialize>(v: &S) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

/// Renders key/value rows with the keys padded to a common width.
pub fn render_table(rows: &[(String, String)]) -> String {
    let width = rows.iter().map(|r| r.0.chars().count()).max().unwrap_or(0);
    rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
}
