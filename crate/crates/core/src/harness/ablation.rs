use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::config::{AblationCell, AblationGrid, DeltaSpec, ExperimentConfig, HeadChoice};
use super::pipeline::{cmd_eval, cmd_split, cmd_synth, cmd_train, EvalReport, Runtime};
use super::provenance::Provenance;
use super::{io_err, HarnessError, Result};
use crate::partitioner::ProbeSubset;
use crate::trainer::HeadKind;

/// The four columns of an ablation table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationScalars {
    pub tar_at_far_1e3: f64,
    pub tar_at_far_1e4: f64,
    pub rank1: f64,
    pub rank20: f64,
}

impl AblationScalars {
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.tar_at_far_1e3,
            self.tar_at_far_1e4,
            self.rank1,
            self.rank20,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub label: String,
    pub head_kind: HeadKind,
    pub input_size_proxy: String,
    pub config_hash: String,
    pub scalars: AblationScalars,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub label: String,
    pub from: String,
    pub to: String,
    pub deltas: [f64; 4],
}

/// A value in units of 1e-4, as printed in four-decimal tables.
pub fn round4(x: f64) -> i64 {
    (x * 1e4).round() as i64
}

/// `to − from` per column, taken between the four-decimal printed values so
/// the row agrees with subtracting the table entries by hand.
pub fn delta_row(from: &AblationScalars, to: &AblationScalars) -> [f64; 4] {
    let (a, b) = (from.as_array(), to.as_array());
    std::array::from_fn(|i| (round4(b[i]) - round4(a[i])) as f64 / 1e4)
}

fn delta_rows(cells: &[CellResult], specs: &[DeltaSpec]) -> Result<Vec<DeltaRow>> {
    let find = |label: &str| {
        cells
            .iter()
            .find(|c| c.label == label)
            .ok_or_else(|| HarnessError::Config(format!("delta references unknown cell '{label}'")))
    };
    specs
        .iter()
        .map(|d| {
            Ok(DeltaRow {
                label: d.label.clone(),
                from: d.from.clone(),
                to: d.to.clone(),
                deltas: delta_row(&find(&d.from)?.scalars, &find(&d.to)?.scalars),
            })
        })
        .collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Cell rows at four decimals, then signed delta rows.
pub fn delta_table_csv(cells: &[CellResult], rows: &[DeltaRow]) -> String {
    let mut out = String::from("row,input_size_proxy,tar_far_1e-3,tar_far_1e-4,rank1,rank20\n");
    for c in cells {
        let v = c.scalars.as_array();
        out.push_str(&format!(
            "{},{},{:.4},{:.4},{:.4},{:.4}\n",
            csv_field(&c.label),
            csv_field(&c.input_size_proxy),
            v[0],
            v[1],
            v[2],
            v[3]
        ));
    }
    for r in rows {
        let d = r.deltas;
        out.push_str(&format!(
            "{},,{:+.4},{:+.4},{:+.4},{:+.4}\n",
            csv_field(&r.label),
            d[0],
            d[1],
            d[2],
            d[3]
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationOutput {
    pub cells: Vec<CellResult>,
    pub deltas: Vec<DeltaRow>,
}

impl AblationOutput {
    pub fn from_cells(cells: Vec<CellResult>, specs: &[DeltaSpec]) -> Result<Self> {
        let deltas = delta_rows(&cells, specs)?;
        Ok(Self { cells, deltas })
    }
}

fn cell_config(base: &ExperimentConfig, cell: &AblationCell) -> ExperimentConfig {
    let mut cfg = base.clone();
    cfg.out_dir = base.out_dir.join("ablate").join(&cell.label);
    cfg.synth.identity_dim = cell.identity_dim;
    cfg.synth.nuisance_dim = cell.nuisance_dim;
    cfg.train.head_kind = cell.head_kind;
    cfg.subsets = vec![ProbeSubset::All];
    cfg.eval.head = HeadChoice::Trained;
    cfg.corpus = Default::default();
    cfg.ablation = AblationGrid {
        cells: vec![cell.clone()],
        deltas: Vec::new(),
    };
    cfg
}

fn run_cell(base: &ExperimentConfig, cell: &AblationCell, rt: &Runtime) -> Result<CellResult> {
    let cfg = cell_config(base, cell);
    cmd_synth(&cfg, rt)?;
    cmd_split(&cfg, rt)?;
    cmd_train(&cfg, rt)?;
    let eval = cmd_eval(&cfg, rt)?;
    let path = eval.dir.join("report_all.json");
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let report: EvalReport =
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(e.to_string()))?;
    let m = report
        .metrics
        .ok_or_else(|| HarnessError::Config("evaluation produced no probes".into()))?;
    Ok(CellResult {
        label: cell.label.clone(),
        head_kind: cell.head_kind,
        input_size_proxy: cell.input_size_proxy(),
        config_hash: cfg.hash(),
        scalars: AblationScalars {
            tar_at_far_1e3: m.tar_at_far_1e3,
            tar_at_far_1e4: m.tar_at_far_1e4,
            rank1: m.rank1,
            rank20: m.rank20,
        },
    })
}

/// Runs the full pipeline per cell under `<out>/ablate/<label>`, then writes
/// `cells.json` and `delta_table.csv`.
pub fn cmd_ablate(cfg: &ExperimentConfig, rt: &Runtime) -> Result<(AblationOutput, Vec<PathBuf>)> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for cell in &cfg.ablation.cells {
        let r = run_cell(cfg, cell, rt).map_err(|e| HarnessError::Cell {
            label: cell.label.clone(),
            source: Box::new(e),
        })?;
        cells.push(r);
    }
    let out = AblationOutput::from_cells(cells, &cfg.ablation.deltas)?;
    let dir = cfg.out_dir.join("ablate");
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let json_path = dir.join("cells.json");
    let csv_path = dir.join("delta_table.csv");
    std::fs::write(
        &json_path,
        serde_json::to_string_pretty(&out).expect("ablation serializes") + "\n",
    )
    .map_err(io_err(&json_path))?;
    std::fs::write(&csv_path, delta_table_csv(&out.cells, &out.deltas))
        .map_err(io_err(&csv_path))?;
    let mut prov = Provenance::new("ablate", &cfg.hash(), cfg.seed);
    prov.record_outputs(&[&json_path, &csv_path])?;
    prov.save(&dir)?;
    Ok((out, vec![json_path, csv_path, dir.join("provenance.json")]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(label: &str, v: [f64; 4]) -> CellResult {
        CellResult {
            label: label.into(),
            head_kind: HeadKind::Projection,
            input_size_proxy: "feature_dim=64".into(),
            config_hash: String::new(),
            scalars: AblationScalars {
                tar_at_far_1e3: v[0],
                tar_at_far_1e4: v[1],
                rank1: v[2],
                rank20: v[3],
            },
        }
    }

    #[test]
    fn identical_cells_give_zero_deltas() {
        let a = cell("a", [0.3, 0.1, 0.4, 0.8]);
        assert_eq!(delta_row(&a.scalars, &a.scalars), [0.0; 4]);
    }

    #[test]
    fn csv_layout() {
        let cells = vec![
            cell("a", [0.25, 0.1, 0.3, 0.75]),
            cell("b", [0.5, 0.1, 0.2, 0.75]),
        ];
        let specs = [DeltaSpec {
            label: "a to b".into(),
            from: "a".into(),
            to: "b".into(),
        }];
        let out = AblationOutput::from_cells(cells, &specs).unwrap();
        assert_eq!(
            delta_table_csv(&out.cells, &out.deltas),
            "row,input_size_proxy,tar_far_1e-3,tar_far_1e-4,rank1,rank20\n\
             a,feature_dim=64,0.2500,0.1000,0.3000,0.7500\n\
             b,feature_dim=64,0.5000,0.1000,0.2000,0.7500\n\
             a to b,,+0.2500,+0.0000,-0.1000,+0.0000\n"
        );
    }

    #[test]
    fn unknown_cell_in_delta_errors() {
        let specs = [DeltaSpec {
            label: "x".into(),
            from: "a".into(),
            to: "zz".into(),
        }];
        assert!(AblationOutput::from_cells(vec![cell("a", [0.0; 4])], &specs).is_err());
    }
}
