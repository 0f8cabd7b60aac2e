//! CSV tables for evaluation reports.
//!
//! Each table has one row per (attention strategy, λ) run. Floats are
//! written in shortest round-trip form and absent values as empty cells, so
//! [`from_tables`] rebuilds exactly the reports given to [`to_tables`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{BiasMetrics, CommunityBias, EvalReport, ExplainabilityMetrics, PerformanceMetrics};
use crate::rationale::AttentionStrategy;

pub const PERFORMANCE_HEADER: [&str; 5] = ["Attention", "Model (lambda)", "Accuracy", "F1 Score", "AUROC"];
pub const BIAS_HEADER: [&str; 6] = ["Attention", "Model (lambda)", "Subgroup AUC", "BPSN", "BNSP", "Aggregation"];
pub const EXPLAINABILITY_HEADER: [&str; 9] = [
    "Attention",
    "Model (lambda)",
    "IOU F1",
    "Token F1",
    "AUPRC",
    "Comprehensiveness",
    "Sufficiency",
    "AUPRC (per post)",
    "Evaluated posts",
];
pub const COMMUNITY_HEADER: [&str; 7] = [
    "Attention",
    "Model (lambda)",
    "Community",
    "Posts",
    "Subgroup AUC",
    "BPSN",
    "BNSP",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub attention: AttentionStrategy,
    pub lambda: f64,
    pub report: EvalReport,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportTables {
    pub performance: String,
    pub bias: String,
    pub explainability: String,
    pub bias_by_community: String,
}

impl ReportTables {
    pub const FILE_NAMES: [&'static str; 4] = [
        "performance.csv",
        "bias.csv",
        "explainability.csv",
        "bias_by_community.csv",
    ];

    pub fn files(&self) -> [(&'static str, &str); 4] {
        [
            (Self::FILE_NAMES[0], self.performance.as_str()),
            (Self::FILE_NAMES[1], self.bias.as_str()),
            (Self::FILE_NAMES[2], self.explainability.as_str()),
            (Self::FILE_NAMES[3], self.bias_by_community.as_str()),
        ]
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Renders a header and rows as CSV text.
pub fn table_from_rows(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn to_tables(rows: &[ReportRow]) -> Result<ReportTables> {
    let key = |r: &ReportRow| vec![r.attention.to_string(), fmt_f64(r.lambda)];
    let performance = rows
        .iter()
        .map(|r| {
            let p = &r.report.performance;
            let mut v = key(r);
            v.extend([fmt_f64(p.accuracy), fmt_f64(p.macro_f1), fmt_opt(p.auroc)]);
            v
        })
        .collect();
    let bias = rows
        .iter()
        .map(|r| {
            let b = &r.report.bias;
            let mut v = key(r);
            v.extend([fmt_opt(b.subgroup_auc), fmt_opt(b.bpsn_auc), fmt_opt(b.bnsp_auc), b.aggregation.clone()]);
            v
        })
        .collect();
    let explainability = rows
        .iter()
        .map(|r| {
            let e = &r.report.explainability;
            let mut v = key(r);
            v.extend([
                fmt_opt(e.iou_f1),
                fmt_opt(e.token_f1),
                fmt_opt(e.auprc),
                fmt_opt(e.comprehensiveness),
                fmt_opt(e.sufficiency),
                fmt_opt(e.auprc_per_post),
                e.evaluated_posts.to_string(),
            ]);
            v
        })
        .collect();
    let community = rows
        .iter()
        .flat_map(|r| {
            r.report.bias.per_community.iter().map(move |(name, c)| {
                let mut v = key(r);
                v.extend([
                    name.clone(),
                    c.posts.to_string(),
                    fmt_opt(c.subgroup_auc),
                    fmt_opt(c.bpsn_auc),
                    fmt_opt(c.bnsp_auc),
                ]);
                v
            })
        })
        .collect();
    Ok(ReportTables {
        performance: table_from_rows(&PERFORMANCE_HEADER, performance)?,
        bias: table_from_rows(&BIAS_HEADER, bias)?,
        explainability: table_from_rows(&EXPLAINABILITY_HEADER, explainability)?,
        bias_by_community: table_from_rows(&COMMUNITY_HEADER, community)?,
    })
}

fn read_table(text: &str, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let found = r.headers()?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Undefined("unexpected report table header"));
    }
    r.records().map(|rec| rec.map_err(Error::from)).collect()
}

fn bad(what: &str) -> Error {
    Error::Config(vec![format!("unparseable report cell: {what}")])
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse().map_err(|_| bad(s))
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_f64(s).map(Some)
    }
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse().map_err(|_| bad(s))
}

type Key = (String, String);

fn key_of(rec: &csv::StringRecord) -> Key {
    (rec[0].to_string(), rec[1].to_string())
}

/// Rebuilds report rows from the four tables.
pub fn from_tables(tables: &ReportTables) -> Result<Vec<ReportRow>> {
    let mut bias: BTreeMap<Key, csv::StringRecord> = read_table(&tables.bias, &BIAS_HEADER)?
        .into_iter()
        .map(|r| (key_of(&r), r))
        .collect();
    let mut expl: BTreeMap<Key, csv::StringRecord> = read_table(&tables.explainability, &EXPLAINABILITY_HEADER)?
        .into_iter()
        .map(|r| (key_of(&r), r))
        .collect();
    let mut communities: BTreeMap<Key, BTreeMap<String, CommunityBias>> = BTreeMap::new();
    for r in read_table(&tables.bias_by_community, &COMMUNITY_HEADER)? {
        communities.entry(key_of(&r)).or_default().insert(
            r[2].to_string(),
            CommunityBias {
                posts: parse_usize(&r[3])?,
                subgroup_auc: parse_opt(&r[4])?,
                bpsn_auc: parse_opt(&r[5])?,
                bnsp_auc: parse_opt(&r[6])?,
            },
        );
    }

    read_table(&tables.performance, &PERFORMANCE_HEADER)?
        .into_iter()
        .map(|p| {
            let key = key_of(&p);
            let b = bias.remove(&key).ok_or_else(|| bad("bias row missing"))?;
            let e = expl.remove(&key).ok_or_else(|| bad("explainability row missing"))?;
            let attention: AttentionStrategy = key.0.parse().map_err(|_| bad(&key.0))?;
            Ok(ReportRow {
                attention,
                lambda: parse_f64(&key.1)?,
                report: EvalReport {
                    performance: PerformanceMetrics {
                        accuracy: parse_f64(&p[2])?,
                        macro_f1: parse_f64(&p[3])?,
                        auroc: parse_opt(&p[4])?,
                    },
                    bias: BiasMetrics {
                        per_community: communities.remove(&key).unwrap_or_default(),
                        aggregation: b[5].to_string(),
                        subgroup_auc: parse_opt(&b[2])?,
                        bpsn_auc: parse_opt(&b[3])?,
                        bnsp_auc: parse_opt(&b[4])?,
                    },
                    explainability: ExplainabilityMetrics {
                        evaluated_posts: parse_usize(&e[8])?,
                        iou_f1: parse_opt(&e[2])?,
                        token_f1: parse_opt(&e[3])?,
                        auprc: parse_opt(&e[4])?,
                        auprc_per_post: parse_opt(&e[7])?,
                        comprehensiveness: parse_opt(&e[5])?,
                        sufficiency: parse_opt(&e[6])?,
                    },
                },
            })
        })
        .collect()
}
