#![allow(dead_code)]

use std::path::PathBuf;

use qualm::diagram::ArcKind;
use qualm::tree::{augment_prototype, layout_variables};
use qualm::utility::{build_constraint_diagram, build_simple_edit_diagram};
use qualm::{parse_source, Assignment, Diagram, DiagramSystem, LanguageName, NodeTree, OrderedDiagram, TaskKind};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;
pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Weights on a quarter grid so that ties actually happen.
fn weight(rng: &mut TestRng) -> f64 {
    rng.gen_range(-8i32..=8) as f64 / 4.0
}

/// Random layered binary diagram over `scope` (system variables, increasing)
/// that accepts `witness` restricted to the scope.
pub fn random_layered(rng: &mut TestRng, scope: &[usize], witness: &Assignment) -> OrderedDiagram {
    let n = scope.len();
    let mut d = Diagram::with_scope(vec![2; n], scope.to_vec());
    let mut levels: Vec<Vec<usize>> = Vec::with_capacity(n + 1);
    for l in 0..=n {
        let width = if l == n { 1 } else { rng.gen_range(1..=3) };
        let nodes = (0..width).map(|i| if l == 0 && i == 0 { d.source() } else { d.add_node(l) }).collect();
        levels.push(nodes);
    }
    d.set_sink(levels[n][0]);
    for l in 0..=n {
        // unlabelled arcs go from lower to higher index, so no cycles
        for a in 0..levels[l].len() {
            for b in a + 1..levels[l].len() {
                let (head, tail) = (levels[l][a], levels[l][b]);
                if tail != d.source() && rng.gen_bool(0.25) {
                    d.add_arc(head, tail, weight(rng), ArcKind::Plain);
                }
            }
        }
        if l == n {
            break;
        }
        for &u in &levels[l] {
            for v in 0..2u8 {
                if rng.gen_bool(0.7) {
                    let t = *levels[l + 1].choose(rng).unwrap();
                    d.add_labeled_arc(u, t, l, v, weight(rng), ArcKind::Plain);
                }
            }
        }
        // the first node of every level carries the witness
        let (u, t) = (levels[l][0], levels[l + 1][0]);
        d.add_labeled_arc(u, t, l, witness.get(scope[l]), weight(rng), ArcKind::Plain);
    }
    d.freeze().expect("generated diagram is valid")
}

/// Random system of `k` diagrams over `n` binary variables with a common
/// feasible assignment. Diagram 0 covers every variable.
pub fn random_layered_system(rng: &mut TestRng, n: usize, k: usize) -> DiagramSystem {
    let witness = Assignment((0..n).map(|_| rng.gen_range(0..2)).collect());
    let mut sys = DiagramSystem::new(vec![2; n]);
    for j in 0..k {
        let scope: Vec<usize> = if j == 0 || rng.gen_bool(0.6) {
            (0..n).collect()
        } else {
            let mut s: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
            if s.is_empty() {
                s.push(rng.gen_range(0..n));
            }
            s
        };
        let d = random_layered(rng, &scope, &witness);
        let scale = if rng.gen_bool(0.5) { 1.0 } else { 1.0 / k as f64 };
        sys.push(d, scale, format!("r{j}")).unwrap();
    }
    sys
}

pub fn random_word(rng: &mut TestRng, alphabet: u8, len: usize) -> Vec<u8> {
    (0..len).map(|_| rng.gen_range(0..alphabet)).collect()
}

/// Sample-average edit utility of a flat prototype against `k` intents.
pub fn random_edit_system(rng: &mut TestRng, n: usize, k: usize) -> DiagramSystem {
    let alphabet = rng.gen_range(2..=4);
    let proto = random_word(rng, alphabet, n);
    let alpha = [0.3, 0.5, 0.7][rng.gen_range(0..3)];
    let beta = [0.3, 0.5, 0.7][rng.gen_range(0..3)];
    let mut sys = DiagramSystem::new(vec![2; n]);
    for j in 0..k {
        let len = rng.gen_range(0..=n + 2);
        let g = if rng.gen_bool(0.5) {
            // a perturbed copy of the prototype
            let mut g = proto.clone();
            for x in g.iter_mut() {
                if rng.gen_bool(0.3) {
                    *x = rng.gen_range(0..alphabet);
                }
            }
            g
        } else {
            random_word(rng, alphabet, len)
        };
        let d = build_simple_edit_diagram(&g, &proto, alpha, beta).unwrap();
        sys.push(d, 1.0 / k as f64, format!("s{j}")).unwrap();
    }
    sys
}

/// Criterion-3 style instance: up to 12 binary variables and at most 4
/// diagrams, alternating between the two generators.
pub fn small_system(rng: &mut TestRng, i: usize) -> DiagramSystem {
    let n = rng.gen_range(1..=12);
    let k = rng.gen_range(1..=4);
    if i % 2 == 0 {
        random_layered_system(rng, n, k)
    } else {
        random_edit_system(rng, n, k)
    }
}

/// Uniformly random choice at every branch of a walk from source to sink.
/// Frozen diagrams have no dead ends, so every walk succeeds.
pub fn random_path_assignment(rng: &mut TestRng, d: &OrderedDiagram) -> Vec<u8> {
    let n = d.num_vars();
    let mut node = d.source() as u32;
    let mut values = Vec::with_capacity(n);
    let mut level = 0;
    loop {
        if level == n && node as usize == d.sink() {
            return values;
        }
        let within: Vec<_> = d.within(level).iter().filter(|a| a.head == node).collect();
        let across: Vec<_> = if level < n { d.across(level).iter().filter(|a| a.head == node).collect() } else { vec![] };
        let pick = rng.gen_range(0..within.len() + across.len());
        if pick < within.len() {
            node = within[pick].tail;
        } else {
            let a = across[pick - within.len()];
            values.push(a.value);
            node = a.tail;
            level += 1;
        }
    }
}

/// Random feasible assignment of an augmented prototype's variables.
pub fn random_feasible(rng: &mut TestRng, prototype: &NodeTree) -> Assignment {
    let c = build_constraint_diagram(prototype, 0.0).unwrap();
    let a = Assignment(random_path_assignment(rng, &c));
    assert_eq!(a.len(), layout_variables(prototype).len());
    a
}

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("corpus")
}

pub fn language_of_dir(dir: &str) -> LanguageName {
    match dir {
        "python" => LanguageName::Python,
        "java" => LanguageName::Java,
        "javascript" => LanguageName::Javascript,
        "cpp" => LanguageName::Cpp,
        other => panic!("unexpected corpus directory {other}"),
    }
}

/// Every corpus snippet with its language, sorted by path.
pub fn corpus() -> Vec<(PathBuf, LanguageName, String)> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(corpus_dir()).unwrap() {
        let dir = entry.unwrap().path();
        let lang = language_of_dir(dir.file_name().unwrap().to_str().unwrap());
        for f in std::fs::read_dir(&dir).unwrap() {
            let p = f.unwrap().path();
            let src = std::fs::read_to_string(&p).unwrap();
            out.push((p, lang, src));
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

pub fn augmented(src: &str, lang: LanguageName, task: TaskKind) -> NodeTree {
    augment_prototype(&parse_source(src, lang), task).unwrap()
}

pub const TASKS: [TaskKind; 4] = [TaskKind::Regions, TaskKind::Prefix, TaskKind::PrefixPlusRegions, TaskKind::ApiCalls];

const NAMES: [&str; 8] = ["x", "y", "total", "item", "count", "data", "result", "value"];
const FUNCS: [&str; 6] = ["load", "parse", "len", "sorted", "process", "os.path.join"];

fn python_line(rng: &mut TestRng) -> String {
    let n = |rng: &mut TestRng| *NAMES.choose(rng).unwrap();
    let f = |rng: &mut TestRng| *FUNCS.choose(rng).unwrap();
    match rng.gen_range(0..6) {
        0 => format!("{} = {}({})\n", n(rng), f(rng), n(rng)),
        1 => format!("{} = {}({}, {})\n", n(rng), f(rng), n(rng), n(rng)),
        2 => format!("{} += {}\n", n(rng), rng.gen_range(1..4)),
        3 => format!("return {}\n", n(rng)),
        4 => format!("print({}[{}])\n", n(rng), rng.gen_range(0..3)),
        _ => format!("{}.append({}({}))\n", n(rng), f(rng), n(rng)),
    }
}

/// Mutates a few lines of `lines`: replace, drop or add.
fn mutate(rng: &mut TestRng, lines: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    for l in lines {
        match rng.gen_range(0..10) {
            0 => {}
            1 => out.push(python_line(rng)),
            2 => {
                out.push(l.clone());
                out.push(python_line(rng));
            }
            _ => out.push(l.clone()),
        }
    }
    out
}

/// Log-probability pieces of random width covering `text`.
pub fn random_pieces(rng: &mut TestRng, text: &str) -> serde_json::Value {
    let chars: Vec<char> = text.chars().collect();
    let mut pieces = Vec::new();
    let mut at = 0;
    while at < chars.len() {
        let w = rng.gen_range(1..=4).min(chars.len() - at);
        let piece: String = chars[at..at + w].iter().collect();
        let lp = -rng.gen_range(0.0..2.5f64);
        pieces.push(serde_json::json!({ "text": piece, "logprob": lp }));
        at += w;
    }
    serde_json::Value::Array(pieces)
}

/// A small Python record: a prototype of `lines` lines and `k` samples
/// derived from it, the first of which is the prototype itself and carries
/// log-probabilities.
pub fn python_record(rng: &mut TestRng, id: &str, lines: usize, k: usize) -> qualm::ExampleRecord {
    let base: Vec<String> = (0..lines).map(|_| python_line(rng)).collect();
    let proto: String = base.concat();
    let mut samples = vec![serde_json::json!({ "text": proto, "logprobs": random_pieces(rng, &proto) })];
    for _ in 1..k {
        samples.push(serde_json::Value::String(mutate(rng, &base).concat()));
    }
    let truth = mutate(rng, &base).concat();
    let holdout = mutate(rng, &base).concat();
    serde_json::from_value(serde_json::json!({
        "id": id,
        "language": "python",
        "context": "import os\ndata = load(path)\n",
        "samples": samples,
        "ground_truth": truth,
        "holdout_sample": holdout,
    }))
    .unwrap()
}
