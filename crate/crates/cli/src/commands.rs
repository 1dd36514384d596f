use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use hintclust::eval::{conditional_entropy_labels, F1_VARIANT};
use hintclust::mutual::{prepare, run_prepared, RunMetrics};
use hintclust::synth::generate;
use hintclust::{
    build_transition, nmi, pairwise_f1, AnchorSet, ClusterLink, CondEntropy, CorpusPair,
    MetricReport, MutualClustering, NmiNorm,
};
use serde::{Deserialize, Serialize};

use crate::config::{parse_sweep, RunConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Assignment {
    pub id: String,
    pub cluster: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnchorIds {
    pub tweet: String,
    pub news: String,
}

/// Layout of `result.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultDoc {
    pub config: serde_json::Value,
    pub labels1: Vec<Assignment>,
    pub labels2: Vec<Assignment>,
    pub anchors: Vec<AnchorIds>,
    pub links: Vec<ClusterLink>,
    pub metrics: RunMetrics,
    pub cond_entropy: Option<CondEntropy>,
}

fn load_corpus(cfg: &RunConfig) -> Result<CorpusPair> {
    let t1 = cfg.require_path(&cfg.t1, "t1")?;
    let t2 = cfg.require_path(&cfg.t2, "t2")?;
    Ok(hintclust::parse_corpus(t1, t2)?)
}

fn run_pipeline(cfg: &RunConfig, corpus: &CorpusPair) -> Result<(MutualClustering, ResultDoc)> {
    let opts = cfg.hint_options();
    let prepared = prepare(corpus, &opts)?;
    let run = run_prepared(&prepared, &opts)?;
    let assign = |docs: &[hintclust::Document], labels: &[usize]| {
        docs.iter()
            .zip(labels)
            .map(|(d, &c)| Assignment {
                id: d.id.clone(),
                cluster: c,
            })
            .collect::<Vec<_>>()
    };
    let cond_entropy = if run.anchors.is_empty() {
        None
    } else {
        Some(conditional_entropy_labels(
            &run.labels1,
            &run.labels2,
            &prepared.transition,
        )?)
    };
    let doc = ResultDoc {
        config: serde_json::to_value(cfg)?,
        labels1: assign(&corpus.collection1, &run.labels1),
        labels2: assign(&corpus.collection2, &run.labels2),
        anchors: run
            .anchors
            .pairs()
            .iter()
            .map(|&(i, j)| AnchorIds {
                tweet: corpus.collection1[i].id.clone(),
                news: corpus.collection2[j].id.clone(),
            })
            .collect(),
        links: run.links.clone(),
        metrics: run.metrics.clone(),
        cond_entropy,
    };
    Ok((run, doc))
}

/// Prints `text` to standard output; a closed pipe is not an error.
fn emit(text: &str) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    let out = cfg.require_path(&cfg.out, "out")?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    Ok(out)
}

pub fn cluster(cfg: &RunConfig) -> Result<()> {
    let corpus = load_corpus(cfg)?;
    let out = out_dir(cfg)?;
    let (run, doc) = run_pipeline(cfg, &corpus)?;

    let mut w = create(&out.join("result.json"))?;
    serde_json::to_writer_pretty(&mut w, &doc)?;
    writeln!(w)?;
    w.flush()?;

    let mut w = create(&out.join("trace.csv"))?;
    run.report.write_trace_csv(&mut w)?;
    w.flush()?;

    for (name, h, docs) in [
        ("confidence1.csv", &run.h1, &corpus.collection1),
        ("confidence2.csv", &run.h2, &corpus.collection2),
    ] {
        let ids: Vec<&str> = docs.iter().map(|d| d.id.as_str()).collect();
        let mut w = create(&out.join(name))?;
        h.write_csv(&mut w, &ids)?;
        w.flush()?;
    }
    log::info!(
        "{} anchors, {} rounds, objective {:.6} -> {:.6}",
        doc.metrics.anchor_count,
        doc.metrics.rounds,
        doc.metrics.objective_initial,
        doc.metrics.objective_final
    );
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let out = out_dir(cfg)?;
    generate(&cfg.synth)?.write_files(out)?;
    Ok(())
}

/// Ground truth per collection, in file order.
#[derive(Debug, Default)]
pub struct Truth {
    tweets: Vec<(String, usize)>,
    news: Vec<(String, usize)>,
}

pub fn read_truth(path: &Path) -> Result<Truth> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut truth = Truth::default();
    for (no, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [collection, id, cluster] = fields[..] else {
            bail!("{}:{}: expected collection,id,cluster", path.display(), no + 1);
        };
        let cluster: usize = cluster
            .parse()
            .with_context(|| format!("{}:{}: bad cluster id", path.display(), no + 1))?;
        match collection {
            "tweet" => truth.tweets.push((id.to_string(), cluster)),
            "news" => truth.news.push((id.to_string(), cluster)),
            other => bail!("{}:{}: unknown collection {other:?}", path.display(), no + 1),
        }
    }
    Ok(truth)
}

/// Predicted labels reordered to follow `truth`; errors on the first id
/// present on one side only.
fn align(pred: &[Assignment], truth: &[(String, usize)], which: &str) -> Result<(Vec<usize>, Vec<usize>)> {
    let by_id: HashMap<&str, usize> = pred.iter().map(|a| (a.id.as_str(), a.cluster)).collect();
    let known: HashMap<&str, ()> = truth.iter().map(|(id, _)| (id.as_str(), ())).collect();
    if let Some((id, _)) = truth.iter().find(|(id, _)| !by_id.contains_key(id.as_str())) {
        bail!("{which} id {id:?} is in the truth file but not in the result");
    }
    if let Some(a) = pred.iter().find(|a| !known.contains_key(a.id.as_str())) {
        bail!("{which} id {:?} is in the result but not in the truth file", a.id);
    }
    let labels = truth.iter().map(|(id, _)| by_id[id.as_str()]).collect();
    let gold = truth.iter().map(|&(_, c)| c).collect();
    Ok((labels, gold))
}

pub fn score(doc: &ResultDoc, truth: &Truth) -> Result<MetricReport> {
    let (l1, g1) = align(&doc.labels1, &truth.tweets, "tweet")?;
    let (l2, g2) = align(&doc.labels2, &truth.news, "news")?;
    let ce = if doc.anchors.is_empty() {
        None
    } else {
        let idx1: HashMap<&str, usize> =
            doc.labels1.iter().enumerate().map(|(i, a)| (a.id.as_str(), i)).collect();
        let idx2: HashMap<&str, usize> =
            doc.labels2.iter().enumerate().map(|(j, a)| (a.id.as_str(), j)).collect();
        let mut pairs = Vec::with_capacity(doc.anchors.len());
        for a in &doc.anchors {
            match (idx1.get(a.tweet.as_str()), idx2.get(a.news.as_str())) {
                (Some(&i), Some(&j)) => pairs.push((i, j)),
                _ => bail!("anchor ({}, {}) refers to an unknown id", a.tweet, a.news),
            }
        }
        let t = build_transition(
            &AnchorSet::from_pairs(pairs)?,
            doc.labels1.len(),
            doc.labels2.len(),
        )?;
        let labels1: Vec<usize> = doc.labels1.iter().map(|a| a.cluster).collect();
        let labels2: Vec<usize> = doc.labels2.iter().map(|a| a.cluster).collect();
        Some(conditional_entropy_labels(&labels1, &labels2, &t)?)
    };
    Ok(MetricReport {
        f1_variant: F1_VARIANT.to_string(),
        nmi1: nmi(&l1, &g1, NmiNorm::Sqrt)?,
        nmi2: nmi(&l2, &g2, NmiNorm::Sqrt)?,
        f1_1: pairwise_f1(&l1, &g1)?,
        f1_2: pairwise_f1(&l2, &g2)?,
        cond_entropy: ce.map(|c| c.empirical),
        cond_entropy_max_aligned: ce.map(|c| c.max_aligned),
        d: doc.metrics.d,
        nd: doc.metrics.nd,
    })
}

pub fn eval(result: &Path, truth: &Path) -> Result<()> {
    let text =
        fs::read_to_string(result).with_context(|| format!("cannot read {}", result.display()))?;
    let doc: ResultDoc = serde_json::from_str(&text)
        .with_context(|| format!("{} is not a result file", result.display()))?;
    let report = score(&doc, &read_truth(truth)?)?;
    emit(&serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

pub fn sweep(base: &RunConfig, truth: &Path, sweep_arg: &str) -> Result<()> {
    let (key, values) = parse_sweep(sweep_arg)?;
    let truth = read_truth(truth)?;
    let corpus = load_corpus(base)?;
    emit(&format!("{key},{}", MetricReport::CSV_HEADER))?;
    for v in values {
        let mut cfg = base.clone();
        cfg.set(&key, &v.to_string())?;
        let (_, doc) = run_pipeline(&cfg, &corpus)?;
        emit(&format!("{v},{}", score(&doc, &truth)?.csv_row()))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PathSummary {
    id: String,
    nnz: usize,
}

#[derive(Serialize)]
struct InspectSummary {
    n1: usize,
    n2: usize,
    anchors: usize,
    meta_paths1: Vec<PathSummary>,
    meta_paths2: Vec<PathSummary>,
    weights1: Vec<f64>,
    weights2: Vec<f64>,
}

/// Writes `sim1.csv`, `sim2.csv`, `transition.csv` and one count file per
/// meta-path, then prints a JSON summary.
pub fn inspect(cfg: &RunConfig) -> Result<()> {
    let corpus = load_corpus(cfg)?;
    let out = out_dir(cfg)?;
    let p = prepare(&corpus, &cfg.hint_options())?;
    for (name, sim) in [("sim1.csv", &p.sim1), ("sim2.csv", &p.sim2)] {
        let mut w = create(&out.join(name))?;
        sim.write_triplet_csv(&mut w)?;
        w.flush()?;
    }
    let mut w = create(&out.join("transition.csv"))?;
    p.transition.write_triplet_csv(&mut w)?;
    w.flush()?;
    for c in p.counts1.iter().chain(&p.counts2) {
        let mut w = create(&out.join(format!("counts_{}.csv", c.meta_path.id)))?;
        c.write_triplet_csv(&mut w)?;
        w.flush()?;
    }
    let summarize = |cs: &[hintclust::CountMatrix]| {
        cs.iter()
            .map(|c| PathSummary {
                id: c.meta_path.id.clone(),
                nnz: c.nnz(),
            })
            .collect::<Vec<_>>()
    };
    let summary = InspectSummary {
        n1: corpus.n1(),
        n2: corpus.n2(),
        anchors: p.anchors.len(),
        meta_paths1: summarize(&p.counts1),
        meta_paths2: summarize(&p.counts2),
        weights1: p.sim1.weights.clone(),
        weights2: p.sim2.weights.clone(),
    };
    emit(&serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}
