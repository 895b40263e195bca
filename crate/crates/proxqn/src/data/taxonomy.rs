//! Class taxonomy (a rooted tree over class ids) and the hierarchical
//! classification dataset built from an svmlight file plus a hierarchy file.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::matrix::FeatureIndexedMatrix;
use super::svmlight::{apply_scale, parse_svmlight, ScaleMode};
use super::DataError;

/// Rooted tree over `K` classes with dense 0-based ids.
///
/// Original class ids from the hierarchy file are kept in a side table; all
/// in-memory ids are the dense remapped ones.
#[derive(Debug)]
pub struct Taxonomy {
    parent: Vec<Option<u32>>,
    children: Vec<Vec<u32>>,
    root: u32,
    leaves: Vec<u32>,
    /// Node order with every parent before its children.
    topo: Vec<u32>,
    /// For each class, its path from the root (inclusive), sorted by id.
    paths: Vec<Vec<u32>>,
    original_ids: Vec<u64>,
}

impl Taxonomy {
    /// Builds and validates a taxonomy from `(parent, child)` edges in
    /// original ids.
    pub fn from_edges(edges: &[(u64, u64)]) -> Result<(Self, HashMap<u64, u32>), DataError> {
        let mut id_map: HashMap<u64, u32> = HashMap::new();
        let mut original_ids = Vec::new();
        let mut intern = |orig: u64, original_ids: &mut Vec<u64>, id_map: &mut HashMap<u64, u32>| {
            *id_map.entry(orig).or_insert_with(|| {
                original_ids.push(orig);
                (original_ids.len() - 1) as u32
            })
        };

        let mut parent: Vec<Option<u32>> = Vec::new();
        for &(p, c) in edges {
            let p = intern(p, &mut original_ids, &mut id_map);
            let c = intern(c, &mut original_ids, &mut id_map);
            let k = original_ids.len();
            parent.resize(k, None);
            if p == c {
                return Err(DataError::Hierarchy(format!("self-loop at class {}", original_ids[p as usize])));
            }
            if let Some(existing) = parent[c as usize] {
                if existing != p {
                    return Err(DataError::Hierarchy(format!(
                        "class {} has two parents",
                        original_ids[c as usize]
                    )));
                }
            }
            parent[c as usize] = Some(p);
        }
        let k = original_ids.len();
        if k == 0 {
            return Err(DataError::Hierarchy("empty hierarchy".into()));
        }

        let roots: Vec<u32> = (0..k as u32).filter(|&n| parent[n as usize].is_none()).collect();
        let root = match roots.as_slice() {
            [r] => *r,
            [] => return Err(DataError::Hierarchy("no root (cycle over all nodes)".into())),
            _ => {
                return Err(DataError::Hierarchy(format!(
                    "multiple roots: {:?}",
                    roots.iter().map(|&r| original_ids[r as usize]).collect::<Vec<_>>()
                )))
            }
        };

        let mut children = vec![Vec::new(); k];
        for c in 0..k {
            if let Some(p) = parent[c] {
                children[p as usize].push(c as u32);
            }
        }

        // Kahn order from the root; anything unreached sits on a cycle.
        let mut topo = Vec::with_capacity(k);
        let mut stack = vec![root];
        while let Some(n) = stack.pop() {
            topo.push(n);
            for &c in children[n as usize].iter().rev() {
                stack.push(c);
            }
        }
        if topo.len() != k {
            return Err(DataError::Hierarchy(format!(
                "cycle detected: {} of {} classes unreachable from the root",
                k - topo.len(),
                k
            )));
        }

        let leaves: Vec<u32> = (0..k as u32)
            .filter(|&n| children[n as usize].is_empty())
            .collect();

        let mut paths: Vec<Vec<u32>> = vec![Vec::new(); k];
        for &n in &topo {
            let mut path = match parent[n as usize] {
                Some(p) => paths[p as usize].clone(),
                None => Vec::new(),
            };
            path.push(n);
            path.sort_unstable();
            paths[n as usize] = path;
        }

        Ok((
            Taxonomy {
                parent,
                children,
                root,
                leaves,
                topo,
                paths,
                original_ids,
            },
            id_map,
        ))
    }

    /// Total number of classes K (internal nodes and leaves).
    pub fn num_classes(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> usize {
        self.root as usize
    }

    pub fn parent(&self, k: usize) -> Option<usize> {
        self.parent[k].map(|p| p as usize)
    }

    pub fn children(&self, k: usize) -> &[u32] {
        &self.children[k]
    }

    pub fn leaves(&self) -> &[u32] {
        &self.leaves
    }

    pub fn is_leaf(&self, k: usize) -> bool {
        self.children[k].is_empty()
    }

    /// Classes in parent-before-children order, starting at the root.
    pub fn topological_order(&self) -> &[u32] {
        &self.topo
    }

    /// Ancestors of `k` including the root and `k` itself, sorted by id.
    pub fn path(&self, k: usize) -> &[u32] {
        &self.paths[k]
    }

    pub fn on_path(&self, ancestor: usize, k: usize) -> bool {
        self.paths[k].binary_search(&(ancestor as u32)).is_ok()
    }

    pub fn original_id(&self, k: usize) -> u64 {
        self.original_ids[k]
    }
}

/// Hierarchical classification dataset: sparse instances, leaf labels, and
/// the class taxonomy.
#[derive(Debug)]
pub struct TaxonomyDataset {
    taxonomy: Taxonomy,
    labels: Vec<u32>,
    features: FeatureIndexedMatrix,
}

impl TaxonomyDataset {
    pub fn new(
        taxonomy: Taxonomy,
        labels: Vec<u32>,
        rows: &[Vec<(u32, f64)>],
        num_features: usize,
    ) -> Result<Self, DataError> {
        assert_eq!(labels.len(), rows.len());
        for &y in &labels {
            if !taxonomy.is_leaf(y as usize) {
                return Err(DataError::LabelNotLeaf(taxonomy.original_id(y as usize)));
            }
        }
        Ok(TaxonomyDataset {
            taxonomy,
            labels,
            features: FeatureIndexedMatrix::from_instance_rows(rows, num_features)?,
        })
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn num_instances(&self) -> usize {
        self.labels.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.num_features()
    }

    /// Leaf label (dense id) of instance `i`.
    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn features(&self) -> &FeatureIndexedMatrix {
        &self.features
    }
}

fn load_hierarchy_edges(path: &Path) -> Result<Vec<(u64, u64)>, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut edges = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<u64, DataError> {
            tok.ok_or_else(|| DataError::parse(path, line_no, "expected \"parent child\""))?
                .parse()
                .map_err(|_| DataError::parse(path, line_no, "expected integer class id"))
        };
        let p = parse(it.next())?;
        let c = parse(it.next())?;
        if it.next().is_some() {
            return Err(DataError::parse(path, line_no, "expected exactly two ids"));
        }
        edges.push((p, c));
    }
    Ok(edges)
}

/// Loads an svmlight data file and a `parent child` hierarchy file.
///
/// Every data label must appear as a leaf of the hierarchy. Class ids are
/// remapped to dense 0-based ids.
pub fn load_svmlight_with_taxonomy(
    data_path: impl AsRef<Path>,
    hierarchy_path: impl AsRef<Path>,
    scale: ScaleMode,
) -> Result<TaxonomyDataset, DataError> {
    let data_path = data_path.as_ref();
    let hierarchy_path = hierarchy_path.as_ref();

    let edges = load_hierarchy_edges(hierarchy_path)?;
    let (taxonomy, id_map) = Taxonomy::from_edges(&edges)?;

    let mut parsed = parse_svmlight(data_path)?;
    apply_scale(&mut parsed.rows, parsed.num_features, scale);
    let mut labels = Vec::with_capacity(parsed.labels.len());
    for (i, raw) in parsed.labels.iter().enumerate() {
        let orig: u64 = raw
            .parse()
            .map_err(|_| DataError::parse(data_path, i + 1, format!("bad class label {raw:?}")))?;
        let dense = *id_map
            .get(&orig)
            .ok_or(DataError::LabelNotLeaf(orig))?;
        labels.push(dense);
    }

    TaxonomyDataset::new(taxonomy, labels, &parsed.rows, parsed.num_features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn two_leaf_tree() {
        let hier = write_tmp("0 1\n0 2\n");
        let data = write_tmp("1 1:1.0\n2 1:0.5 2:1.5\n");
        let d = load_svmlight_with_taxonomy(data.path(), hier.path(), ScaleMode::None).unwrap();
        let t = d.taxonomy();
        assert_eq!(t.num_classes(), 3);
        assert_eq!(t.leaves().len(), 2);
        let leaf1 = d.label(0);
        assert_eq!(t.path(leaf1), &[0, leaf1 as u32]);
        assert!(t.on_path(t.root(), leaf1));
        assert_eq!(d.num_features(), 2);
    }

    #[test]
    fn label_must_be_a_leaf() {
        let hier = write_tmp("0 1\n1 2\n");
        let data = write_tmp("1 1:1.0\n");
        let err = load_svmlight_with_taxonomy(data.path(), hier.path(), ScaleMode::None).unwrap_err();
        assert!(matches!(err, DataError::LabelNotLeaf(1)));
    }

    #[test]
    fn multiple_roots_are_rejected() {
        let err = Taxonomy::from_edges(&[(0, 1), (2, 3)]).unwrap_err();
        assert!(err.to_string().contains("multiple roots"), "{err}");
    }

    #[test]
    fn cycles_are_rejected() {
        // node 1 would get two parents
        let err = Taxonomy::from_edges(&[(0, 1), (1, 2), (2, 1)]).unwrap_err();
        assert!(err.to_string().contains("two parents"), "{err}");
        // 2 <-> 3 cycle detached from the root
        let err = Taxonomy::from_edges(&[(0, 1), (2, 3), (3, 2)]).unwrap_err();
        assert!(err.to_string().contains("cycle"), "{err}");
    }

    #[test]
    fn topological_order_puts_parents_first() {
        let (t, _) = Taxonomy::from_edges(&[(0, 1), (1, 2), (1, 3), (0, 4)]).unwrap();
        let pos: Vec<usize> = {
            let mut pos = vec![0; t.num_classes()];
            for (i, &n) in t.topological_order().iter().enumerate() {
                pos[n as usize] = i;
            }
            pos
        };
        for k in 0..t.num_classes() {
            if let Some(p) = t.parent(k) {
                assert!(pos[p] < pos[k]);
            }
        }
        assert_eq!(t.leaves(), &[2, 3, 4]);
    }
}
