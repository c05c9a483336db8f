use std::path::{Path, PathBuf};

use ah_ensemble::fixtures::{write_fixture, SyntheticSpec};

fn files(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).unwrap();
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), bytes));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn bundled_fixture_matches_generator() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), &SyntheticSpec::default()).unwrap();
    let bundled = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic");
    let (fresh, shipped) = (files(dir.path()), files(&bundled));
    let names = |v: &[(PathBuf, Vec<u8>)]| v.iter().map(|(p, _)| p.clone()).collect::<Vec<_>>();
    assert_eq!(names(&fresh), names(&shipped));
    for ((path, a), (_, b)) in fresh.iter().zip(&shipped) {
        assert!(a == b, "{} differs; regenerate with `cargo run --example synthetic_fixture`", path.display());
    }
}
