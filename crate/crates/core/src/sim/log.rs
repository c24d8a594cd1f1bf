//! Per-step time series and its CSV form.
//!
//! `vc` and `va` are evaluated with the estimated weights `Ŵ`; the ideal
//! weights are not observable.

use std::fmt::Write as _;

use nalgebra::Vector2;

/// Column names, in file order.
pub const CSV_COLUMNS: [&str; 31] = [
    "t", "q1", "q2", "qdot1", "qdot2", "qd1", "qd2", "qd_dot1", "qd_dot2", "z1_1", "z1_2", "z2_1", "z2_2", "z1g_1",
    "z1g_2", "gamma", "kc1", "kc2", "alpha1", "alpha2", "tau1", "tau2", "r", "delta", "j_hat", "wa_norm", "wc_norm",
    "v1", "vr", "vc", "va",
];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LogRow {
    pub t: f64,
    pub q: Vector2<f64>,
    pub qdot: Vector2<f64>,
    pub qd: Vector2<f64>,
    pub qd_dot: Vector2<f64>,
    pub z1: Vector2<f64>,
    pub z2: Vector2<f64>,
    pub z1_gamma: Vector2<f64>,
    pub gamma: f64,
    pub kc: Vector2<f64>,
    pub alpha: Vector2<f64>,
    pub tau: Vector2<f64>,
    pub r: f64,
    pub delta: f64,
    pub j_hat: f64,
    pub wa_norm: f64,
    pub wc_norm: f64,
    pub v1: f64,
    pub vr: f64,
    pub vc: f64,
    pub va: f64,
}

impl LogRow {
    pub fn values(&self) -> [f64; 31] {
        let v2 = |v: &Vector2<f64>| [v[0], v[1]];
        let [q1, q2] = v2(&self.q);
        let [qv1, qv2] = v2(&self.qdot);
        let [d1, d2] = v2(&self.qd);
        let [dv1, dv2] = v2(&self.qd_dot);
        let [a1, a2] = v2(&self.z1);
        let [b1, b2] = v2(&self.z2);
        let [g1, g2] = v2(&self.z1_gamma);
        let [k1, k2] = v2(&self.kc);
        let [al1, al2] = v2(&self.alpha);
        let [t1, t2] = v2(&self.tau);
        [
            self.t,
            q1,
            q2,
            qv1,
            qv2,
            d1,
            d2,
            dv1,
            dv2,
            a1,
            a2,
            b1,
            b2,
            g1,
            g2,
            self.gamma,
            k1,
            k2,
            al1,
            al2,
            t1,
            t2,
            self.r,
            self.delta,
            self.j_hat,
            self.wa_norm,
            self.wc_norm,
            self.v1,
            self.vr,
            self.vc,
            self.va,
        ]
    }

    pub fn from_values(v: &[f64; 31]) -> Self {
        let p = |i: usize| Vector2::new(v[i], v[i + 1]);
        Self {
            t: v[0],
            q: p(1),
            qdot: p(3),
            qd: p(5),
            qd_dot: p(7),
            z1: p(9),
            z2: p(11),
            z1_gamma: p(13),
            gamma: v[15],
            kc: p(16),
            alpha: p(18),
            tau: p(20),
            r: v[22],
            delta: v[23],
            j_hat: v[24],
            wa_norm: v[25],
            wc_norm: v[26],
            v1: v[27],
            vr: v[28],
            vc: v[29],
            va: v[30],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }
}

/// Quantities kept alongside each row for diagnostics but not exported.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RowExtras {
    /// `‖S_c‖²`
    pub critic_basis_sq: f64,
    /// `‖S_a‖²`
    pub actor_basis_sq: f64,
    /// `λ_max(M(q))`
    pub inertia_max: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimLog {
    pub rows: Vec<LogRow>,
    pub extras: Vec<RowExtras>,
}

impl SimLog {
    pub fn push(&mut self, row: LogRow, extras: RowExtras) {
        self.rows.push(row);
        self.extras.push(extras);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&LogRow> {
        self.rows.last()
    }

    /// Header plus one line per row, every value with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 + self.rows.len() * 31 * 25);
        out.push_str(&CSV_COLUMNS.join(","));
        out.push('\n');
        for row in &self.rows {
            write_row(&mut out, row);
        }
        out
    }

    /// Parses the output of [`SimLog::to_csv`]. Diagnostic extras are not part
    /// of the file and come back zeroed.
    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty CSV")?;
        let names: Vec<&str> = header.split(',').map(str::trim).collect();
        if names != CSV_COLUMNS {
            let missing: Vec<&str> = CSV_COLUMNS.iter().copied().filter(|c| !names.contains(c)).collect();
            return Err(format!("unexpected header; missing columns: {missing:?}"));
        }
        let mut log = SimLog::default();
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut vals = [0.0; 31];
            let mut count = 0;
            for (i, field) in line.split(',').enumerate() {
                if i >= 31 {
                    return Err(format!("line {}: too many fields", n + 2));
                }
                vals[i] = field.trim().parse().map_err(|e| format!("line {}: field {}: {e}", n + 2, i + 1))?;
                count += 1;
            }
            if count != 31 {
                return Err(format!("line {}: expected 31 fields, found {count}", n + 2));
            }
            log.push(LogRow::from_values(&vals), RowExtras::default());
        }
        Ok(log)
    }
}

pub fn write_row(out: &mut String, row: &LogRow) {
    for (i, v) in row.values().iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v:.16e}");
    }
    out.push('\n');
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_row(t: f64) -> LogRow {
        let mut v = [0.0; 31];
        for (i, x) in v.iter_mut().enumerate() {
            *x = (i as f64 + 1.0) * 0.1 + t / 3.0;
        }
        v[0] = t;
        LogRow::from_values(&v)
    }

    #[test]
    fn csv_is_lossless() {
        let mut log = SimLog::default();
        for k in 0..5 {
            log.push(sample_row(k as f64 * 1e-3), RowExtras::default());
        }
        let csv = log.to_csv();
        assert!(csv.starts_with("t,q1,q2,"));
        assert_eq!(SimLog::from_csv(&csv).unwrap(), log);
        let first_line = csv.lines().nth(1).unwrap();
        assert_eq!(first_line.split(',').count(), 31);
        // 17 significant digits: one leading digit and 16 after the point.
        assert_eq!(first_line.split(',').nth(1).unwrap(), "2.0000000000000001e-1");
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert!(SimLog::from_csv("").is_err());
        assert!(SimLog::from_csv("t,q1\n0,1\n").unwrap_err().contains("missing"));
        let header = CSV_COLUMNS.join(",");
        assert!(SimLog::from_csv(&format!("{header}\n1,2,3\n")).is_err());
        assert!(SimLog::from_csv(&format!("{header}\n")).unwrap().is_empty());
    }
}
