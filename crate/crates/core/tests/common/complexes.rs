use std::collections::HashMap;

use msem::topology::{GridComplex, IncidenceMatrix};

/// Scatters local element incidences through the global numbering; an entry
/// seen twice must carry the same value.
pub fn scatter(
    blocks: impl Iterator<Item = (IncidenceMatrix, Vec<usize>, Vec<usize>)>,
    rows: usize,
    cols: usize,
) -> IncidenceMatrix {
    let mut seen: HashMap<(usize, usize), i8> = HashMap::new();
    for (local, rmap, cmap) in blocks {
        for (r, c, v) in local.triplets() {
            let key = (rmap[r], cmap[c]);
            if let Some(&old) = seen.get(&key) {
                assert_eq!(old, v, "conflicting entry at {key:?}");
            }
            seen.insert(key, v);
        }
    }
    let t: Vec<(usize, usize, i8)> = seen.into_iter().map(|((r, c), v)| (r, c, v)).collect();
    IncidenceMatrix::from_triplets(rows, cols, &t)
}

/// Local-to-global line-edge numbering for the element at `(a, b)`.
pub fn edge_gather(g: &GridComplex, n: usize, a: usize, b: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for j in 0..=n {
        for i in 0..n {
            out.push(g.x_edge(a * n + i, b * n + j));
        }
    }
    for j in 0..n {
        for i in 0..=n {
            out.push(g.y_edge(a * n + i, b * n + j));
        }
    }
    out
}
