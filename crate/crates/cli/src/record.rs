//! Output rows and their CSV encoding.
//!
//! Every experiment kind writes the same column set; columns that do not
//! apply to a row are left empty. Floats are written with 17 significant
//! digits so that values round-trip exactly.

use serde::{Deserialize, Serialize};

/// Column order of the output table. New columns may only be appended.
pub const COLUMNS: [&str; 28] = [
    "config_hash",
    "seed",
    "experiment",
    "kind",
    "row",
    "quantity",
    "test",
    "d",
    "p",
    "alpha",
    "size",
    "r",
    "eps",
    "t",
    "s",
    "h",
    "n",
    "value",
    "std_error",
    "ci_lower",
    "ci_upper",
    "reference",
    "bound",
    "margin",
    "pass",
    "status",
    "message",
    "stream",
];

/// One output row.
///
/// * `value` is the measured `quantity`; `std_error`, `ci_lower`, `ci_upper`
///   describe its Monte-Carlo error.
/// * `reference` is the oracle or comparison value, `bound` the analytic
///   bound or tolerance, `margin` the signed distance to failing (negative
///   means the check failed) and `pass` the check outcome, when a check applies.
/// * `status` is `ok` or the error class of a failed computation, with the
///   error text in `message`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub config_hash: String,
    pub seed: u64,
    pub experiment: String,
    pub kind: String,
    pub row: usize,
    pub quantity: String,
    pub test: String,
    pub d: Option<usize>,
    pub p: Option<f64>,
    pub alpha: Option<f64>,
    pub size: Option<f64>,
    pub r: Option<f64>,
    pub eps: Option<f64>,
    pub t: Option<f64>,
    pub s: Option<f64>,
    pub h: Option<f64>,
    pub n: Option<u64>,
    pub value: Option<f64>,
    pub std_error: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub reference: Option<f64>,
    pub bound: Option<f64>,
    pub margin: Option<f64>,
    pub pass: Option<bool>,
    pub status: String,
    pub message: String,
    /// `seed:stream_id` of the random stream behind the row.
    pub stream: String,
}

pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt<T>(v: Option<T>, f: impl FnOnce(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

impl Record {
    pub fn fields(&self) -> Vec<String> {
        let fl = |v: Option<f64>| opt(v, format_float);
        vec![
            self.config_hash.clone(),
            self.seed.to_string(),
            self.experiment.clone(),
            self.kind.clone(),
            self.row.to_string(),
            self.quantity.clone(),
            self.test.clone(),
            opt(self.d, |v| v.to_string()),
            fl(self.p),
            fl(self.alpha),
            fl(self.size),
            fl(self.r),
            fl(self.eps),
            fl(self.t),
            fl(self.s),
            fl(self.h),
            opt(self.n, |v| v.to_string()),
            fl(self.value),
            fl(self.std_error),
            fl(self.ci_lower),
            fl(self.ci_upper),
            fl(self.reference),
            fl(self.bound),
            fl(self.margin),
            opt(self.pass, |v| v.to_string()),
            self.status.clone(),
            self.message.clone(),
            self.stream.clone(),
        ]
    }

    pub fn set_check(&mut self, margin: f64) {
        self.margin = Some(margin);
        self.pass = Some(margin >= 0.0);
    }
}

/// Encodes rows as CSV with a header line.
pub fn to_csv(records: &[Record]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS).expect("write to memory");
    for r in records {
        w.write_record(r.fields()).expect("write to memory");
    }
    w.into_inner().expect("flush to memory")
}
