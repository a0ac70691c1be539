//! Plain-text artifacts: CSV tables, key=value summaries, resolved configs.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// Numbers print in Rust's shortest round-trip form, so equal values always
/// produce equal bytes and every decimal separator is '.'.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:?}")
    }
}

/// A CSV table built in memory and written in one go.
#[derive(Debug, Clone)]
pub struct Csv {
    /// Optional `#` lines ahead of the header row.
    comments: Vec<String>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Csv {
            comments: Vec::new(),
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) {
        self.comments.push(line.into());
    }

    pub fn row(&mut self, cells: Vec<String>) {
        assert_eq!(cells.len(), self.header.len(), "row width must match the header");
        self.rows.push(cells);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.comments {
            let _ = writeln!(s, "# {c}");
        }
        let _ = writeln!(s, "{}", self.header.join(","));
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|c| escape(c)).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.render())
    }
}

fn escape(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

/// Ordered `key=value` lines.
#[derive(Debug, Clone, Default)]
pub struct Summary {
    entries: Vec<(String, String)>,
}

impl Summary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn num(&mut self, key: &str, value: f64) {
        self.put(key, num(value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

/// Where a run puts its files. Single-table commands take `--out FILE`; the
/// companions sit beside it as `FILE_STEM.<suffix>`. Directory commands take
/// `--out DIR` and use fixed names inside it.
#[derive(Debug, Clone)]
pub struct Layout {
    dir: PathBuf,
    stem: Option<String>,
    file: Option<PathBuf>,
}

impl Layout {
    pub fn file(path: &Path) -> io::Result<Self> {
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let dir = if dir.as_os_str().is_empty() { PathBuf::from(".") } else { dir };
        fs::create_dir_all(&dir)?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
        Ok(Layout {
            dir,
            stem: Some(stem),
            file: Some(path.to_path_buf()),
        })
    }

    pub fn dir(path: &Path) -> io::Result<Self> {
        fs::create_dir_all(path)?;
        Ok(Layout {
            dir: path.to_path_buf(),
            stem: None,
            file: None,
        })
    }

    /// Path for a named artifact, e.g. `critical.csv` or `summary.txt`.
    pub fn path(&self, name: &str) -> PathBuf {
        match &self.stem {
            Some(stem) => self.dir.join(format!("{stem}.{name}")),
            None => self.dir.join(name),
        }
    }

    /// The main table: `--out FILE` itself, or `DIR/<name>`.
    pub fn main(&self, name: &str) -> PathBuf {
        match &self.file {
            Some(f) => f.clone(),
            None => self.dir.join(name),
        }
    }
}
