//! Fixed inputs for the benchmarks.

use qualm::ExampleRecord;
use qualm::pipeline::SampleText;
use qualm::LanguageName;

pub const PROTOTYPE: &str = "def summarize(rows, key):
    totals = {}
    for row in rows:
        k = row[key]
        totals[k] = totals.get(k, 0) + row.amount
    ordered = sorted(totals.items(), key=lambda kv: kv[1])
    print(len(ordered))
    return ordered[:10]
";

/// Line-level edits applied to the prototype to make the other samples.
const EDITS: [(usize, &str); 7] = [
    (4, "        totals[k] = totals.get(k, 0) + row.value\n"),
    (6, "    print(ordered)\n"),
    (5, "    ordered = sorted(totals.items())\n"),
    (7, "    return ordered\n"),
    (2, "    for row in rows[1:]:\n"),
    (3, "        k = row.get(key)\n"),
    (6, "    log.info(len(ordered))\n"),
];

/// The prototype plus `k - 1` single-line variants, `k <= 8`.
pub fn samples(k: usize) -> Vec<String> {
    let lines: Vec<&str> = PROTOTYPE.split_inclusive('\n').collect();
    let mut out = vec![PROTOTYPE.to_string()];
    for &(at, repl) in EDITS.iter().take(k.saturating_sub(1)) {
        let mut l = lines.clone();
        l[at] = repl;
        out.push(l.concat());
    }
    out
}

pub fn record(k: usize) -> ExampleRecord {
    ExampleRecord {
        id: format!("bench-{k}"),
        language: LanguageName::Python,
        context: "import logging as log\n".into(),
        prototype: None,
        samples: samples(k).into_iter().map(SampleText::Plain).collect(),
        holdout_sample: None,
        ground_truth: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variants_differ_from_the_prototype() {
        let s = samples(8);
        assert_eq!(s.len(), 8);
        assert!(s[1..].iter().all(|v| v != PROTOTYPE && v.lines().count() == 8));
    }
}
