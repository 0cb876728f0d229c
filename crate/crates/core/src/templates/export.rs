use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Metric, ProbeInfo, ScoreMatrix};

/// JSON sidecar written next to the score CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrixMeta {
    pub metric: Metric,
    pub n_probes: usize,
    pub n_gallery: usize,
    pub gallery: Vec<String>,
    pub probes: Vec<ProbeInfo>,
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Header `probe_id,<gallery ids…>`, then one row per probe. Scores use the
/// shortest round-trip decimal form.
pub fn matrix_csv(m: &ScoreMatrix) -> String {
    let mut out = String::from("probe_id");
    for g in m.gallery() {
        out.push(',');
        out.push_str(&csv_field(g));
    }
    out.push('\n');
    for (i, p) in m.probes().iter().enumerate() {
        out.push_str(&csv_field(&p.probe_id));
        for s in m.row(i) {
            out.push(',');
            out.push_str(&s.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn matrix_metadata_json(m: &ScoreMatrix) -> String {
    let meta = ScoreMatrixMeta {
        metric: m.metric(),
        n_probes: m.n_probes(),
        n_gallery: m.n_gallery(),
        gallery: m.gallery().to_vec(),
        probes: m.probes().to_vec(),
    };
    serde_json::to_string_pretty(&meta).expect("metadata serializes")
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn write_score_matrix(
    m: &ScoreMatrix,
    dir: impl AsRef<Path>,
    stem: &str,
) -> std::io::Result<()> {
    let dir = dir.as_ref();
    fs::write(dir.join(format!("{stem}.csv")), matrix_csv(m))?;
    fs::write(
        dir.join(format!("{stem}.json")),
        matrix_metadata_json(m) + "\n",
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let m = ScoreMatrix::from_labels(
            &["a", "b"],
            &["a", "b,x"],
            vec![vec![0.5, -1.0], vec![0.25, 1.0]],
        );
        assert!(m.is_err(), "probe b is not enrolled under \"b,x\"");
        let m = ScoreMatrix::from_labels(
            &["a", "a"],
            &["a", "b,x"],
            vec![vec![0.5, -1.0], vec![0.25, 1.0]],
        )
        .unwrap();
        assert_eq!(matrix_csv(&m), "probe_id,a,\"b,x\"\np0,0.5,-1\np1,0.25,1\n");
        let meta: ScoreMatrixMeta = serde_json::from_str(&matrix_metadata_json(&m)).unwrap();
        assert_eq!(meta.n_probes, 2);
        assert_eq!(meta.gallery, vec!["a", "b,x"]);
    }
}
