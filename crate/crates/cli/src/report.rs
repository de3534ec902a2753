//! Text, JSON and CSV rendering.
//!
//! Text rounds estimates to 3 decimals and p-values to 4. JSON keeps full
//! precision. CSV for analyses is long format: `section,item,quantity,value`.

use std::fmt::Write as _;

use basket_core::{EstimationMetrics, IdentificationMetrics, NullMethod};
use serde::Serialize;

use crate::analysis::{
    AnalysisReport, EstimateRow, GofRow, ModelRow, Outcome, RankingReport, TestRow,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Json,
    Csv,
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn method_text(method: &NullMethod, fallback: bool) -> String {
    match method {
        NullMethod::Exact => "exact".into(),
        NullMethod::MonteCarlo { reps, seed } => {
            let why = if fallback { ", lattice too large" } else { "" };
            format!("Monte Carlo, {reps} draws, seed {seed}{why}")
        }
    }
}

fn estimates_text(out: &mut String, rows: &[EstimateRow], alpha: f64) {
    let level = 100.0 * (1.0 - alpha);
    let _ = writeln!(out, "Common effect (MH, {level:.0}% Wald CI)");
    for r in rows {
        match &r.estimate {
            Outcome::Value(e) => {
                let _ = writeln!(
                    out,
                    "  {:<5} {:>7.3}  ({:.3}, {:.3})  se {:.3}",
                    r.scale,
                    e.point,
                    e.ci_low,
                    e.ci_high,
                    e.std_error()
                );
            }
            Outcome::Error(msg) => {
                let _ = writeln!(out, "  {:<5} not estimable: {msg}", r.scale);
            }
        }
    }
}

fn tests_text(out: &mut String, rows: &[TestRow]) {
    let _ = writeln!(out, "Global null test (upper tail)");
    for r in rows {
        match &r.result {
            Outcome::Value(v) => {
                let _ = writeln!(
                    out,
                    "  {:<5} = {:<9.4} p = {:.4}  [{}]",
                    r.name,
                    v.statistic,
                    v.p_value,
                    method_text(&v.method, v.fallback)
                );
            }
            Outcome::Error(msg) => {
                let _ = writeln!(out, "  {:<5} failed: {msg}", r.name);
            }
        }
    }
}

fn gof_text(out: &mut String, rows: &[GofRow]) {
    let _ = writeln!(out, "Homogeneity (chi-squared)");
    for r in rows {
        match &r.result {
            Outcome::Value(g) => {
                let _ = writeln!(
                    out,
                    "  {:<5} Z2 = {:.3}  df = {}  p = {:.4}",
                    r.scale, g.statistic, g.df, g.p_value
                );
            }
            Outcome::Error(msg) => {
                let _ = writeln!(out, "  {:<5} not available: {msg}", r.scale);
            }
        }
    }
}

fn model_text(out: &mut String, m: &ModelRow) {
    let flag = if m.near_optimal { "*" } else { " " };
    let _ = writeln!(out, "{:>5} {flag} {:>9.3}  {}", m.rank, m.gic, m.model);
    for s in &m.subclasses {
        let baskets: Vec<String> = s.baskets.iter().map(|b| b.to_string()).collect();
        let _ = writeln!(
            out,
            "          {:<24} {:>7.3} ({:.3}, {:.3})",
            format!("[{}]", baskets.join(" ")),
            s.estimate,
            s.ci_low,
            s.ci_high
        );
    }
}

pub fn ranking_text(r: &RankingReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Models on the {} scale ({}): {} candidates, min GIC {:.3}, {} within {}",
        r.scale, r.strategy, r.total_models, r.min_gic, r.near_optimal_count, r.window
    );
    let _ = writeln!(
        out,
        " rank       GIC  model / subclass estimates, least effective first"
    );
    let mut previous = 0;
    for m in &r.models {
        if m.rank > previous + 1 {
            let _ = writeln!(out, "  ...");
        }
        previous = m.rank;
        model_text(&mut out, m);
    }
    out
}

pub fn analysis_text(r: &AnalysisReport) -> String {
    let mut out = String::new();
    let level = 100.0 * (1.0 - r.alpha);
    let _ = writeln!(
        out,
        "{:<12} {:>4} {:>4} {:>6} {:>6}  {:<16} {:>7} {:>6}",
        "basket",
        "y",
        "n",
        "pi0",
        "rate",
        format!("{level:.0}% CP CI"),
        "RD",
        "RR"
    );
    for b in &r.baskets {
        let _ = writeln!(
            out,
            "{:<12} {:>4} {:>4} {:>6.3} {:>6.3}  {:<16} {:>7.3} {:>6.3}",
            b.label,
            b.y,
            b.n,
            b.pi0,
            b.rate,
            format!("({:.3}, {:.3})", b.ci_low, b.ci_high),
            b.rd,
            b.rr
        );
    }
    out.push('\n');
    estimates_text(&mut out, &r.estimates, r.alpha);
    out.push('\n');
    tests_text(&mut out, &r.tests);
    out.push('\n');
    gof_text(&mut out, &r.gof);
    if let Some(ranking) = &r.ranking {
        out.push('\n');
        out.push_str(&ranking_text(ranking));
    }
    out
}

pub fn tests_only_text(rows: &[TestRow]) -> String {
    let mut out = String::new();
    tests_text(&mut out, rows);
    out
}

pub fn gof_only_text(rows: &[GofRow]) -> String {
    let mut out = String::new();
    gof_text(&mut out, rows);
    out
}

struct LongCsv(csv::Writer<Vec<u8>>);

impl LongCsv {
    fn new() -> Self {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["section", "item", "quantity", "value"])
            .expect("in-memory write");
        LongCsv(w)
    }

    fn row(&mut self, section: &str, item: &str, quantity: &str, value: impl ToString) {
        self.0
            .write_record([section, item, quantity, &value.to_string()])
            .expect("in-memory write");
    }

    fn finish(self) -> String {
        String::from_utf8(self.0.into_inner().expect("in-memory write")).expect("utf-8")
    }
}

fn tests_csv(w: &mut LongCsv, rows: &[TestRow]) {
    for r in rows {
        match &r.result {
            Outcome::Value(v) => {
                w.row("test", &r.name, "statistic", v.statistic);
                w.row("test", &r.name, "p_value", v.p_value);
                let method = match v.method {
                    NullMethod::Exact => "exact".to_string(),
                    NullMethod::MonteCarlo { reps, seed } => format!("mc:{reps}:{seed}"),
                };
                w.row("test", &r.name, "method", method);
            }
            Outcome::Error(msg) => w.row("test", &r.name, "error", msg),
        }
    }
}

fn gof_csv(w: &mut LongCsv, rows: &[GofRow]) {
    for r in rows {
        match &r.result {
            Outcome::Value(g) => {
                w.row("gof", &r.scale, "statistic", g.statistic);
                w.row("gof", &r.scale, "df", g.df);
                w.row("gof", &r.scale, "p_value", g.p_value);
            }
            Outcome::Error(msg) => w.row("gof", &r.scale, "error", msg),
        }
    }
}

fn ranking_csv(w: &mut LongCsv, r: &RankingReport) {
    for m in &r.models {
        let item = m.rank.to_string();
        w.row("model", &item, "model", &m.model);
        w.row("model", &item, "gic", m.gic);
        w.row("model", &item, "near_optimal", m.near_optimal);
        for (j, s) in m.subclasses.iter().enumerate() {
            let item = format!("{}.{}", m.rank, j + 1);
            let baskets: Vec<String> = s.baskets.iter().map(|b| b.to_string()).collect();
            w.row("subclass", &item, "baskets", baskets.join(" "));
            w.row("subclass", &item, "estimate", s.estimate);
            w.row("subclass", &item, "ci_low", s.ci_low);
            w.row("subclass", &item, "ci_high", s.ci_high);
        }
    }
}

pub fn analysis_csv(r: &AnalysisReport) -> String {
    let mut w = LongCsv::new();
    for b in &r.baskets {
        w.row("basket", &b.label, "y", b.y);
        w.row("basket", &b.label, "n", b.n);
        w.row("basket", &b.label, "pi0", b.pi0);
        w.row("basket", &b.label, "rate", b.rate);
        w.row("basket", &b.label, "ci_low", b.ci_low);
        w.row("basket", &b.label, "ci_high", b.ci_high);
        w.row("basket", &b.label, "rd", b.rd);
        w.row("basket", &b.label, "rr", b.rr);
    }
    for e in &r.estimates {
        match &e.estimate {
            Outcome::Value(v) => {
                w.row("estimate", &e.scale, "point", v.point);
                w.row("estimate", &e.scale, "se", v.std_error());
                w.row("estimate", &e.scale, "ci_low", v.ci_low);
                w.row("estimate", &e.scale, "ci_high", v.ci_high);
            }
            Outcome::Error(msg) => w.row("estimate", &e.scale, "error", msg),
        }
    }
    tests_csv(&mut w, &r.tests);
    gof_csv(&mut w, &r.gof);
    if let Some(ranking) = &r.ranking {
        ranking_csv(&mut w, ranking);
    }
    w.finish()
}

pub fn tests_csv_only(rows: &[TestRow]) -> String {
    let mut w = LongCsv::new();
    tests_csv(&mut w, rows);
    w.finish()
}

pub fn gof_csv_only(rows: &[GofRow]) -> String {
    let mut w = LongCsv::new();
    gof_csv(&mut w, rows);
    w.finish()
}

pub fn ranking_csv_only(r: &RankingReport) -> String {
    let mut w = LongCsv::new();
    ranking_csv(&mut w, r);
    w.finish()
}

/// One row per scenario and estimator: mean, bias, coverage and the two
/// rejection rates, as proportions.
pub fn estimation_csv(results: &[EstimationMetrics]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "scenario",
        "estimator",
        "truth",
        "mean",
        "bias",
        "coverage",
        "wald_rejection",
        "exact_rejection",
        "completed",
        "failures",
    ])
    .expect("in-memory write");
    for m in results {
        for e in &m.estimators {
            w.write_record([
                m.label.clone(),
                e.estimator.clone(),
                e.truth.to_string(),
                e.mean.to_string(),
                e.bias().to_string(),
                e.coverage.to_string(),
                e.wald_rejection.to_string(),
                e.exact_rejection.to_string(),
                e.completed.to_string(),
                e.failures.to_string(),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
}

/// One row per scenario and basket; bias and MSE are x100, rejection in %.
pub fn identification_csv(results: &[IdentificationMetrics]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "scenario",
        "strategy",
        "basket",
        "true_rate",
        "estimate",
        "bias_x100",
        "mse_x100",
        "reject_pct",
        "replicates",
        "failures",
    ])
    .expect("in-memory write");
    for m in results {
        for (k, b) in m.baskets.iter().enumerate() {
            w.write_record([
                m.label.clone(),
                m.strategy.name().to_string(),
                (k + 1).to_string(),
                b.true_rate.to_string(),
                b.estimate.to_string(),
                b.bias_x100.to_string(),
                b.mse_x100.to_string(),
                b.reject_pct.to_string(),
                m.replicates.to_string(),
                m.failures.to_string(),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
}

pub fn estimation_text(m: &EstimationMetrics) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} ({} replicates)", m.label, m.replicates);
    let _ = writeln!(
        out,
        "  {:<8} {:>8} {:>8} {:>8} {:>9} {:>7} {:>7}",
        "", "truth", "mean", "bias", "coverage", "Wald", "exact"
    );
    for e in &m.estimators {
        let _ = writeln!(
            out,
            "  {:<8} {:>8.3} {:>8.3} {:>8.3} {:>8.1}% {:>6.1}% {:>6.1}%",
            e.estimator,
            e.truth,
            e.mean,
            e.bias(),
            100.0 * e.coverage,
            100.0 * e.wald_rejection,
            100.0 * e.exact_rejection
        );
        if e.failures > 0 {
            let _ = writeln!(out, "  {:<8} {} replicates not estimable", "", e.failures);
        }
    }
    out
}

pub fn identification_text(m: &IdentificationMetrics) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} ({}, {} replicates)",
        m.label,
        m.strategy.name(),
        m.replicates
    );
    let _ = writeln!(
        out,
        "  {:<6} {:>6} {:>8} {:>9} {:>9} {:>8}",
        "basket", "rate", "mean", "bias x100", "MSE x100", "reject"
    );
    for (k, b) in m.baskets.iter().enumerate() {
        let _ = writeln!(
            out,
            "  {:<6} {:>6.3} {:>8.3} {:>9.2} {:>9.2} {:>7.1}%",
            k + 1,
            b.true_rate,
            b.estimate,
            b.bias_x100,
            b.mse_x100,
            b.reject_pct
        );
    }
    if m.failures > 0 {
        let _ = writeln!(out, "  {} replicates failed", m.failures);
    }
    out
}
