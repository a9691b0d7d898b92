#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use psynorm::corpus::DatasetKind;

const WORDS: [&str; 24] = [
    "the", "cat", "sat", "on", "a", "warm", "mat", "while", "dogs", "ran", "past", "old", "red", "barn", "and",
    "children", "laughed", "at", "sudden", "rain", "over", "quiet", "green", "hills",
];

/// A word or sentence memorability table with two-decimal scores and three
/// scalar features loosely tied to the score.
pub fn norm_table(kind: DatasetKind, n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from("id\ttext\tscore\tfrequency\tnum_meanings\tnum_synonyms\n");
    for i in 0..n {
        let cents: u32 = rng.random_range(5..=95);
        let score = cents as f64 / 100.0;
        let text = match kind {
            DatasetKind::WordMem => format!("{}{}", WORDS[i % WORDS.len()], i),
            _ => {
                let len = rng.random_range(4..9);
                let mut s: Vec<&str> = (0..len).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect();
                s.push("today.");
                s.join(" ")
            }
        };
        let f = score * 3.0 + rng.random_range(-1.0..1.0);
        let m = rng.random_range(1..6) as f64;
        let syn = -score * 2.0 + rng.random_range(-1.0..1.0);
        let _ = writeln!(
            out,
            "{}{i:04}\t{text}\t{score:.2}\t{f:.4}\t{m}\t{syn:.4}",
            kind.as_str()
        );
    }
    out
}

/// A per-token reading-time table with integer millisecond values.
pub fn rt_table(n_sentences: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from("sentence_id\tposition\tsurface\trt_ms\n");
    for s in 0..n_sentences {
        let len = rng.random_range(5..10);
        for p in 0..len {
            let mut w = WORDS[rng.random_range(0..WORDS.len())].to_string();
            if p == 0 {
                let mut c = w.chars();
                w = c.next().unwrap().to_uppercase().chain(c).collect();
            }
            if p == len - 1 {
                w.push('.');
            }
            let rt: u32 = rng.random_range(150..650);
            let _ = writeln!(out, "s{s:03}\t{p}\t{w}\t{rt}");
        }
    }
    out
}

pub fn write_dataset(dir: &Path, kind: DatasetKind, seed: u64) -> PathBuf {
    let (name, body) = match kind {
        DatasetKind::WordMem | DatasetKind::SentMem => (format!("{kind}.tsv"), norm_table(kind, 80, seed)),
        DatasetKind::RtSpr | DatasetKind::RtEt => (format!("{kind}.tsv"), rt_table(40, seed)),
    };
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

pub fn config_toml(kind: DatasetKind, data: &Path, out: &Path, regime: &str, mock: Option<&str>) -> String {
    let mock = mock.map(|m| format!("mock = \"{m}\"\n")).unwrap_or_default();
    format!(
        r#"output_dir = "{out}"
regime = "{regime}"

[dataset]
kind = "{kind}"
path = "{data}"

[backend]
model = "gpt-3.5-turbo"
max_retries = 0
{mock}
[seeds]
split_seed = 11
fewshot_seed = 12
baseline_seed = 13

[splits]
baseline_n = 10

[fine_tune]
poll_interval_secs = 0.01
"#,
        out = out.display(),
        data = data.display(),
    )
}

pub fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("experiment.toml");
    fs::write(&p, body).unwrap();
    p
}

/// Reads a TSV into (header, rows).
pub fn read_tsv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split('\t').map(str::to_string).collect();
    let rows = lines.map(|l| l.split('\t').map(str::to_string).collect()).collect();
    (header, rows)
}

pub fn column(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name} in {header:?}"))
}
