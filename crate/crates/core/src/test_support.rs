//! Helpers shared between the crate's unit and integration tests.

use std::path::Path;

/// FNV-1a digest over a directory tree: relative paths (sorted) plus file
/// contents. Two trees with equal digest are byte-identical for our
/// purposes of checking run-to-run determinism.
pub fn hash_dir(root: &Path) -> u64 {
    let mut files = Vec::new();
    collect(root, root, &mut files);
    files.sort();
    let mut hash = 0xcbf29ce484222325u64;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
    };
    for rel in &files {
        eat(rel.as_bytes());
        eat(&std::fs::read(root.join(rel)).expect("readable file"));
    }
    hash
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<String>) {
    for entry in std::fs::read_dir(dir).expect("readable directory") {
        let path = entry.expect("readable entry").path();
        if path.is_dir() {
            collect(root, &path, out);
        } else {
            out.push(
                path.strip_prefix(root)
                    .expect("path under root")
                    .to_string_lossy()
                    .into_owned(),
            );
        }
    }
}
