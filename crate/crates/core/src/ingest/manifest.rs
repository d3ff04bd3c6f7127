use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use super::IngestError;

/// One labelled video: a directory of frames relative to the manifest root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestRecord {
    pub video_dir: String,
    pub label: String,
}

impl ManifestRecord {
    /// Stable identifier of the video, the relative directory with `/` separators.
    pub fn id(&self) -> &str {
        &self.video_dir
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    root: PathBuf,
    records: Vec<ManifestRecord>,
    classes: Vec<String>,
}

impl DatasetManifest {
    pub fn records(&self) -> &[ManifestRecord] {
        &self.records
    }

    /// Class names, sorted lexicographically.
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.binary_search_by(|c| c.as_str().cmp(label)).ok()
    }

    pub fn video_path(&self, record: &ManifestRecord) -> PathBuf {
        self.root.join(&record.video_dir)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| IngestError::Manifest {
            line: 0,
            msg: format!("{}: {e}", path.display()),
        })?;
        let root = path.parent().unwrap_or(Path::new("."));
        parse_manifest(&text, root)
    }
}

fn normalize_dir(dir: &str) -> String {
    let parts: Vec<&str> = dir
        .split(['/', '\\'])
        .filter(|p| !p.is_empty() && *p != ".")
        .collect();
    parts.join("/")
}

/// Parses `<video_dir>\t<class_name>` lines. Blank lines and lines starting
/// with `#` are skipped; every directory must exist under `root`.
pub fn parse_manifest(text: &str, root: &Path) -> Result<DatasetManifest, IngestError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |msg: String| IngestError::Manifest { line, msg };
        let (dir, label) = trimmed
            .split_once('\t')
            .ok_or_else(|| err("expected `<video_dir>\\t<class_name>`, no tab found".into()))?;
        let (dir, label) = (dir.trim(), label.trim());
        if dir.is_empty() || label.is_empty() {
            return Err(err("empty video directory or class name".into()));
        }
        if label.contains('\t') {
            return Err(err("more than two tab-separated fields".into()));
        }
        let video_dir = normalize_dir(dir);
        if video_dir.is_empty() || video_dir.split('/').any(|p| p == "..") {
            return Err(err(format!("invalid video directory {dir:?}")));
        }
        if !seen.insert(video_dir.clone()) {
            return Err(err(format!("duplicate video {video_dir:?}")));
        }
        if !root.join(&video_dir).is_dir() {
            return Err(err(format!(
                "video directory {} does not exist",
                root.join(&video_dir).display()
            )));
        }
        records.push(ManifestRecord {
            video_dir,
            label: label.to_owned(),
        });
    }
    if records.is_empty() {
        return Err(IngestError::Manifest {
            line: 0,
            msg: "manifest has no records".into(),
        });
    }
    let classes: Vec<String> = records
        .iter()
        .map(|r| r.label.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    Ok(DatasetManifest {
        root: root.to_path_buf(),
        records,
        classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dirs(root: &Path, names: &[&str]) {
        for n in names {
            std::fs::create_dir_all(root.join(n)).unwrap();
        }
    }

    #[test]
    fn parses_three_classes() {
        let tmp = tempfile::tempdir().unwrap();
        dirs(tmp.path(), &["v1", "v2", "v3"]);
        let m = parse_manifest("v1\tsea\nv2\tgrass\nv3\ttrees\n", tmp.path()).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.classes(), &["grass", "sea", "trees"]);
        assert_eq!(m.class_index("sea"), Some(1));
    }

    #[test]
    fn missing_tab_reports_line() {
        let tmp = tempfile::tempdir().unwrap();
        dirs(tmp.path(), &["v1", "v2"]);
        match parse_manifest("v1\tsea\nv2 grass\n", tmp.path()) {
            Err(IngestError::Manifest { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_directory_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        dirs(tmp.path(), &["a/v1"]);
        match parse_manifest("a/v1\tsea\n./a//v1\tsea\n", tmp.path()) {
            Err(IngestError::Manifest { line, msg }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("duplicate"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_directory_and_empty_file() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(
            parse_manifest("nope\tsea\n", tmp.path()),
            Err(IngestError::Manifest { line: 1, .. })
        ));
        assert!(parse_manifest("\n# only a comment\n", tmp.path()).is_err());
    }
}
