//! Generations JSONL → judge records CSV.
//!
//! Each line: `{"generation_id", "condition", "model_tag", "target_trait",
//! "polarity", "text", "fluency"?}`. Every generation is scored on every
//! rubric; output order follows the input regardless of concurrency.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde_json::Value;

use traitgeo::contrast::write_records_csv;
use traitgeo::directions::trait_index;
use traitgeo::judge::{score_generation, HttpJudge, Judge, JudgeConfig, MockJudge, RubricSet};
use traitgeo::{Error, JudgeScoreRecord, Polarity};

use super::write_file;
use crate::args::JudgeArgs;
use crate::{usage, CliResult};

struct Generation {
    id: String,
    condition: String,
    model_tag: String,
    target: usize,
    polarity: Polarity,
    text: String,
    fluency: Option<f64>,
}

fn field<'a>(v: &'a Value, key: &str, line: usize) -> CliResult<&'a Value> {
    v.get(key)
        .ok_or_else(|| usage(format!("generations line {line}: missing `{key}`")))
}

fn text_field(v: &Value, key: &str, line: usize) -> CliResult<String> {
    match field(v, key, line)? {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(usage(format!("generations line {line}: `{key}` is {other}"))),
    }
}

fn parse_generations(raw: &str) -> CliResult<Vec<Generation>> {
    let mut out = Vec::new();
    for (i, l) in raw.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let line = i + 1;
        let v: Value = serde_json::from_str(l).map_err(|e| usage(format!("generations line {line}: {e}")))?;
        let target_label = text_field(&v, "target_trait", line)?;
        let target = trait_index(&target_label)
            .ok_or_else(|| usage(format!("generations line {line}: unknown trait `{target_label}`")))?;
        let polarity: Polarity = text_field(&v, "polarity", line)?.parse()?;
        let fluency = match v.get("fluency") {
            None | Some(Value::Null) => None,
            Some(f) => Some(
                f.as_f64()
                    .ok_or_else(|| usage(format!("generations line {line}: bad fluency {f}")))?,
            ),
        };
        out.push(Generation {
            id: text_field(&v, "generation_id", line)?,
            condition: text_field(&v, "condition", line)?,
            model_tag: text_field(&v, "model_tag", line)?,
            target,
            polarity,
            text: text_field(&v, "text", line)?,
            fluency,
        });
    }
    if out.is_empty() {
        return Err(usage("generations file is empty"));
    }
    Ok(out)
}

fn build_judge(a: &JudgeArgs) -> CliResult<Box<dyn Judge>> {
    if a.mock {
        return Ok(Box::new(MockJudge));
    }
    let (Some(endpoint), Some(model)) = (&a.endpoint, &a.model) else {
        return Err(usage("either --mock or --endpoint with --model is required"));
    };
    let mut cfg = JudgeConfig::new(endpoint.clone(), model.clone());
    cfg.max_concurrency = a.concurrency;
    cfg.max_retries = a.retries;
    cfg.timeout_secs = a.timeout;
    cfg.verdict_log = a.verdict_log.clone();
    Ok(Box::new(HttpJudge::new(cfg)?))
}

pub fn run(a: &JudgeArgs) -> CliResult<()> {
    if a.concurrency == 0 {
        return Err(usage("--concurrency must be at least 1"));
    }
    let raw = std::fs::read_to_string(&a.generations)
        .map_err(|e| Error::Io { path: a.generations.clone(), source: e })?;
    let generations = parse_generations(&raw)?;
    let rubrics = match &a.rubrics {
        Some(p) => RubricSet::load(p)?,
        None => RubricSet::defaults(),
    };
    let c = rubrics.rubrics.len();
    if let Some(g) = generations.iter().find(|g| g.target >= c) {
        return Err(usage(format!("generation {} targets trait {} but only {c} rubrics exist", g.id, g.target)));
    }
    let judge = build_judge(a)?;

    let jobs = generations.len() * c;
    let slots: Vec<Mutex<Option<Result<f64, Error>>>> = (0..jobs).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..a.concurrency.min(jobs) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= jobs {
                    break;
                }
                let (g, m) = (&generations[k / c], k % c);
                let result = score_generation(judge.as_ref(), &g.text, &rubrics.rubrics[m]);
                *slots[k].lock().unwrap() = Some(result);
            });
        }
    });

    let mut records = Vec::with_capacity(jobs);
    for (k, slot) in slots.into_iter().enumerate() {
        let score = slot.into_inner().unwrap().expect("every job ran")?;
        let g = &generations[k / c];
        records.push(JudgeScoreRecord {
            condition: g.condition.clone(),
            model_tag: g.model_tag.clone(),
            target_trait: g.target,
            polarity: g.polarity,
            measured_trait: k % c,
            score,
            fluency: g.fluency,
            generation_id: g.id.clone(),
        });
    }
    let mut buf = Vec::new();
    write_records_csv(&records, &mut buf)?;
    write_file(&a.out, &buf)
}
