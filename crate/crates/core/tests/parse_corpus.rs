mod common;

use common::*;
use qualm::parse::subtokenize_strings;
use qualm::parse_source;

#[test]
fn corpus_covers_every_language() {
    let corpus = corpus();
    assert!(corpus.len() >= 40);
    for dir in ["python", "java", "javascript", "cpp"] {
        let lang = language_of_dir(dir);
        assert!(corpus.iter().filter(|(_, l, _)| *l == lang).count() >= 10, "{dir}");
    }
}

#[test]
fn corpus_round_trips() {
    for (path, lang, src) in corpus() {
        let tree = parse_source(&src, lang);
        assert_eq!(tree.source_text(), src, "{}", path.display());
        let full = tree.text();
        assert!(full.starts_with(&src), "{}", path.display());
        assert_eq!(parse_source(&src, lang), tree, "parsing is deterministic");
        assert_eq!(subtokenize_strings(&tree).source_text(), src, "{}", path.display());
    }
}

#[test]
fn unbalanced_snippets_get_synthetic_closers() {
    for (path, lang, src) in corpus() {
        if !path.file_stem().unwrap().to_str().unwrap().starts_with("unclosed") {
            continue;
        }
        let tree = parse_source(&src, lang);
        assert!(tree.tokens().iter().any(|t| t.synthetic), "{}", path.display());
        assert!(tree.text().len() > src.len());
    }
}
