use std::fmt::Write;

use crate::metrics::DistanceTriple;

use super::{CorpusEvaluation, ModelW1};

/// `method,corpus_size,hq_ratio,n_hq,mst_spread,tail_count,generated_hq_ratio`;
/// `tail_count` counts speakers above `tail_cut`.
pub fn hq_table_csv(evals: &[CorpusEvaluation], tail_cut: f64, generated_hq: &[f64]) -> String {
    let mut out = String::from("method,corpus_size,hq_ratio,n_hq,mst_spread,tail_count,generated_hq_ratio\n");
    for (i, e) in evals.iter().enumerate() {
        let tail = e.scores.iter().filter(|s| s.value() > tail_cut).count();
        let gen = generated_hq.get(i).map_or(String::new(), |g| g.to_string());
        let _ = writeln!(
            out,
            "{},{},{},{},{},{tail},{gen}",
            e.method, e.corpus_size, e.hq_ratio, e.n_hq, e.mst_spread
        );
    }
    out
}

/// One row per edge, one column per method.
pub fn cumhist_csv(edges: &[f64], columns: &[(String, Vec<usize>)]) -> String {
    let mut out = String::from("edge");
    for (name, _) in columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (j, e) in edges.iter().enumerate() {
        let _ = write!(out, "{e}");
        for (_, counts) in columns {
            let _ = write!(out, ",{}", counts[j]);
        }
        out.push('\n');
    }
    out
}

pub fn w1_csv(rows: &[ModelW1]) -> String {
    let mut out = String::from("model,m,mean,std,runs\n");
    for r in rows {
        let m = r.m.map_or(String::new(), |m| m.to_string());
        let _ = writeln!(out, "{},{m},{},{},{}", r.model, r.stats.mean, r.stats.std, r.stats.runs);
    }
    out
}

pub fn distance_triple_csv(t: &DistanceTriple) -> String {
    format!("d_rr,d_gg,d_rg\n{},{},{}\n", t.d_rr, t.d_gg, t.d_rg)
}

pub fn estimator_corr_csv(subset_fraction: f64, query_points: usize, pearson: f64) -> String {
    format!("subset_fraction,query_points,pearson\n{subset_fraction},{query_points},{pearson}\n")
}
