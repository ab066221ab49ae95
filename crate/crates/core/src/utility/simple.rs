use crate::diagram::{ArcKind, Diagram, OrderedDiagram};
use crate::error::BuildError;

/// Grid diagram for flat sequences: node `(i, j)` has consumed `i` intent
/// tokens and `j` prototype tokens and sits at level `j`. Variable `j`
/// is 1 when prototype token `j` is UNSURE.
pub fn build_simple_edit_diagram<T: PartialEq>(
    g: &[T],
    prototype: &[T],
    alpha: f64,
    beta: f64,
) -> Result<OrderedDiagram, BuildError> {
    let (m, n) = (g.len(), prototype.len());
    let mut d = Diagram::binary(n);
    let mut ids = vec![vec![0; n + 1]; m + 1];
    for (i, row) in ids.iter_mut().enumerate() {
        for (j, id) in row.iter_mut().enumerate() {
            *id = if i == 0 && j == 0 { d.source() } else { d.add_node(j) };
        }
    }
    for i in 0..=m {
        for j in 0..=n {
            let here = ids[i][j];
            if i > 0 && j > 0 && g[i - 1] == prototype[j - 1] {
                let from = ids[i - 1][j - 1];
                d.add_labeled_arc(from, here, j - 1, 0, 1.0, ArcKind::Match);
                d.add_labeled_arc(from, here, j - 1, 1, alpha, ArcKind::Match);
            }
            if i > 0 {
                d.add_arc(ids[i - 1][j], here, 0.0, ArcKind::Insert);
            }
            if j > 0 {
                let from = ids[i][j - 1];
                d.add_labeled_arc(from, here, j - 1, 0, -1.0, ArcKind::Delete);
                d.add_labeled_arc(from, here, j - 1, 1, -beta, ArcKind::Delete);
            }
        }
    }
    d.set_sink(ids[m][n]);
    Ok(d.freeze()?)
}
