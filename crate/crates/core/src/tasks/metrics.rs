use std::fmt::Write as _;

/// Columns of `metrics.csv`, in order. Every task writes the same header and
/// leaves cells it does not report empty.
pub const METRIC_COLUMNS: [&str; 11] = [
    "step",
    "loss",
    "loss_data",
    "loss_eikonal",
    "loss_surface",
    "loss_pde",
    "psnr",
    "ssim",
    "iou",
    "mse",
    "eikonal_error",
];

/// One row of `metrics.csv`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricRecord {
    pub step: usize,
    pub loss: f64,
    pub loss_data: Option<f64>,
    pub loss_eikonal: Option<f64>,
    pub loss_surface: Option<f64>,
    pub loss_pde: Option<f64>,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub iou: Option<f64>,
    pub mse: Option<f64>,
    pub eikonal_error: Option<f64>,
}

pub fn csv_header() -> String {
    METRIC_COLUMNS.join(",")
}

/// Shortest round-trip decimal; infinities print as `inf` / `-inf`.
pub fn format_value(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

impl MetricRecord {
    pub fn new(step: usize, loss: f64) -> Self {
        Self { step, loss, ..Self::default() }
    }

    fn optional(&self) -> [Option<f64>; 9] {
        [
            self.loss_data,
            self.loss_eikonal,
            self.loss_surface,
            self.loss_pde,
            self.psnr,
            self.ssim,
            self.iou,
            self.mse,
            self.eikonal_error,
        ]
    }

    pub fn csv_row(&self) -> String {
        let mut s = format!("{},{}", self.step, format_value(self.loss));
        for v in self.optional() {
            s.push(',');
            if let Some(v) = v {
                let _ = write!(s, "{}", format_value(v));
            }
        }
        s
    }
}

/// Full `metrics.csv` text with a trailing newline.
pub fn metrics_csv(records: &[MetricRecord]) -> String {
    let mut out = csv_header();
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_header() {
        assert_eq!(
            csv_header(),
            "step,loss,loss_data,loss_eikonal,loss_surface,loss_pde,psnr,ssim,iou,mse,eikonal_error"
        );
    }

    #[test]
    fn rows_leave_absent_cells_empty() {
        let mut r = MetricRecord::new(10, 0.25);
        r.psnr = Some(f64::INFINITY);
        r.ssim = Some(1.0);
        assert_eq!(r.csv_row(), "10,0.25,,,,,inf,1.0,,,");
        assert_eq!(r.csv_row().split(',').count(), METRIC_COLUMNS.len());
        let csv = metrics_csv(&[r.clone(), r]);
        assert_eq!(csv.lines().count(), 3);
    }
}
