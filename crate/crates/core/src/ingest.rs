//! Repository ingestion: enumerate a source tree into a content-addressed
//! manifest, and fetch remote repositories (optionally pinned to a revision)
//! into a local checkout using the `git` command-line tool.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;

use globset::{Glob, GlobSet, GlobSetBuilder};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use walkdir::WalkDir;

use crate::rules::RulePack;

/// Identity of an audited repository snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoRef {
    /// Where the code came from: a URL, or a local path.
    pub locator: String,
    /// Short human name, usually the repository directory name.
    pub name: String,
    /// Resolved commit id when known; `None` for unpinned local trees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revision: Option<String>,
}

/// Whether a manifest entry is a host-language source (scanned) or another
/// file the caller asked to track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LanguageTag {
    Host,
    Other,
}

/// One file in a manifest, content-addressed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    /// Path relative to the enumeration root, with forward slashes.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
    pub language: LanguageTag,
}

/// File selection: which extensions count as host sources, plus optional
/// include globs (restrict) and exclude globs (remove). Glob patterns match
/// the forward-slash relative path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub host_extensions: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub include: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exclude: Vec<String>,
}

impl FilterSpec {
    pub fn for_pack(pack: &RulePack) -> FilterSpec {
        FilterSpec {
            host_extensions: pack.host_extensions.clone(),
            include: Vec::new(),
            exclude: Vec::new(),
        }
    }
}

/// Directory names never descended into.
pub const DEFAULT_EXCLUDED_DIRS: &[&str] = &[
    ".eggs",
    ".git",
    ".hg",
    ".idea",
    ".mypy_cache",
    ".pytest_cache",
    ".svn",
    ".tox",
    ".venv",
    ".vscode",
    "__pycache__",
    "build",
    "dist",
    "node_modules",
    "site-packages",
    "target",
    "vendor",
    "venv",
];

/// Deterministic listing of the files an audit covers. The content hash is
/// computed over everything except `created_at`, so re-running on identical
/// inputs yields an identical hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanManifest {
    pub repo: RepoRef,
    pub filter: FilterSpec,
    pub files: Vec<SourceFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
}

impl ScanManifest {
    /// Hex SHA-256 of the canonical manifest JSON (timestamp excluded).
    pub fn content_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.created_at = None;
        let json = serde_json::to_vec(&canonical).expect("manifest always serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Paths must be unique and strictly ascending.
    pub fn validate(&self) -> Result<(), IngestError> {
        for pair in self.files.windows(2) {
            if pair[0].path >= pair[1].path {
                return Err(IngestError::InvalidManifest(format!(
                    "file paths are not strictly ascending: {:?} then {:?}",
                    pair[0].path, pair[1].path
                )));
            }
        }
        Ok(())
    }

    pub fn host_files(&self) -> impl Iterator<Item = &SourceFile> {
        self.files.iter().filter(|f| f.language == LanguageTag::Host)
    }
}

/// Result of enumerating a tree: the manifest plus non-fatal warnings
/// (unreadable or binary files that were skipped).
#[derive(Debug, Clone)]
pub struct Enumeration {
    pub manifest: ScanManifest,
    pub warnings: Vec<String>,
}

/// A fetched repository checkout.
#[derive(Debug, Clone)]
pub struct FetchedSource {
    pub repo: RepoRef,
    /// Directory to enumerate; `dest` itself, or the subdirectory a
    /// `/tree/<rev>/<subpath>` locator points at.
    pub checkout_root: PathBuf,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read root path {0:?}: {1}")]
    UnreadableRoot(PathBuf, #[source] std::io::Error),
    #[error("root path {0:?} is not a directory")]
    NotADirectory(PathBuf),
    #[error("invalid glob pattern {pattern:?}: {source}")]
    BadPattern {
        pattern: String,
        #[source]
        source: globset::Error,
    },
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("git is not available: {0}")]
    GitUnavailable(String),
    #[error("destination {0:?} already exists and is not empty")]
    DestinationNotEmpty(PathBuf),
    #[error("i/o failure at {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("fetch failed for {locator}: {detail}")]
    Fetch { locator: String, detail: String },
    #[error("revision {revision:?} not found in {locator}: {detail}")]
    Revision {
        locator: String,
        revision: String,
        detail: String,
    },
}

fn build_globset(patterns: &[String]) -> Result<Option<GlobSet>, IngestError> {
    if patterns.is_empty() {
        return Ok(None);
    }
    let mut builder = GlobSetBuilder::new();
    for pattern in patterns {
        let glob = Glob::new(pattern).map_err(|source| IngestError::BadPattern {
            pattern: pattern.clone(),
            source,
        })?;
        builder.add(glob);
    }
    let set = builder.build().map_err(|source| IngestError::BadPattern {
        pattern: patterns.join(", "),
        source,
    })?;
    Ok(Some(set))
}

fn relative_slash_path(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

fn is_host_file(rel: &str, host_extensions: &[String]) -> bool {
    let name = rel.rsplit('/').next().unwrap_or(rel);
    match name.rsplit_once('.') {
        Some((stem, ext)) if !stem.is_empty() => {
            let ext = ext.to_lowercase();
            host_extensions.iter().any(|e| e.eq_ignore_ascii_case(&ext))
        }
        _ => false,
    }
}

/// Walk `root` and build a manifest. Host-language files are always
/// candidates; when include globs are given they restrict the candidate set
/// and may add non-host files (tracked as `Other`, never scanned). Exclude
/// globs remove files; well-known build/VCS directories are never entered.
pub fn enumerate_sources(root: &Path, repo: RepoRef, filter: &FilterSpec) -> Result<Enumeration, IngestError> {
    let meta = std::fs::metadata(root).map_err(|e| IngestError::UnreadableRoot(root.to_path_buf(), e))?;
    if !meta.is_dir() {
        return Err(IngestError::NotADirectory(root.to_path_buf()));
    }
    let include = build_globset(&filter.include)?;
    let exclude = build_globset(&filter.exclude)?;
    let mut files = Vec::new();
    let mut warnings = Vec::new();
    let walker = WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| {
            !(e.depth() > 0
                && e.file_type().is_dir()
                && DEFAULT_EXCLUDED_DIRS.contains(&e.file_name().to_string_lossy().as_ref()))
        });
    for entry in walker {
        let entry = match entry {
            Ok(e) => e,
            Err(err) => {
                warnings.push(format!("skipped unreadable entry: {err}"));
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = relative_slash_path(root, entry.path());
        if let Some(ex) = &exclude {
            if ex.is_match(&rel) {
                continue;
            }
        }
        let host = is_host_file(&rel, &filter.host_extensions);
        let wanted = match &include {
            Some(inc) => inc.is_match(&rel),
            None => host,
        };
        if !wanted {
            continue;
        }
        let bytes = match std::fs::read(entry.path()) {
            Ok(b) => b,
            Err(err) => {
                warnings.push(format!("skipped unreadable file {rel}: {err}"));
                continue;
            }
        };
        if bytes.contains(&0) {
            warnings.push(format!("skipped binary file {rel}"));
            continue;
        }
        files.push(SourceFile {
            path: rel,
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(&bytes)),
            language: if host { LanguageTag::Host } else { LanguageTag::Other },
        });
    }
    files.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = ScanManifest {
        repo,
        filter: filter.clone(),
        files,
        created_at: None,
    };
    manifest.validate()?;
    Ok(Enumeration { manifest, warnings })
}

/// Split a repository locator into a clone URL, an optional revision embedded
/// in a `/tree/<rev>[/<subpath>]` (or GitLab `/-/tree/...`) segment, and the
/// optional subpath.
pub(crate) fn parse_locator(locator: &str) -> (String, Option<String>, Option<String>) {
    for marker in ["/-/tree/", "/tree/"] {
        if let Some(idx) = locator.find(marker) {
            let clone_url = locator[..idx].trim_end_matches('/').to_string();
            let rest = &locator[idx + marker.len()..];
            let rest = rest.trim_matches('/');
            if rest.is_empty() {
                return (clone_url, None, None);
            }
            return match rest.split_once('/') {
                Some((rev, sub)) => (clone_url, Some(rev.to_string()), Some(sub.to_string())),
                None => (clone_url, Some(rest.to_string()), None),
            };
        }
    }
    (locator.trim_end_matches('/').to_string(), None, None)
}

fn repo_name(clone_url: &str) -> String {
    clone_url
        .trim_end_matches('/')
        .rsplit('/')
        .next()
        .unwrap_or("repository")
        .trim_end_matches(".git")
        .to_string()
}

fn looks_like_sha(rev: &str) -> bool {
    (7..=40).contains(&rev.len()) && rev.chars().all(|c| c.is_ascii_hexdigit())
}

fn revision_problem(stderr: &str) -> bool {
    let s = stderr.to_lowercase();
    [
        "couldn't find remote ref",
        "not our ref",
        "unknown revision",
        "bad object",
        "unadvertised object",
        "pathspec",
        "reference is not a tree",
    ]
    .iter()
    .any(|needle| s.contains(needle))
}

struct Git<'a> {
    cwd: &'a Path,
}

impl<'a> Git<'a> {
    fn run(&self, args: &[&str]) -> Result<String, String> {
        let output = Command::new("git")
            .args(args)
            .current_dir(self.cwd)
            .output()
            .map_err(|e| format!("failed to spawn git: {e}"))?;
        let stderr = String::from_utf8_lossy(&output.stderr).into_owned();
        if output.status.success() {
            Ok(String::from_utf8_lossy(&output.stdout).into_owned())
        } else {
            Err(if stderr.trim().is_empty() {
                format!("git {} exited with {}", args.first().unwrap_or(&"?"), output.status)
            } else {
                stderr
            })
        }
    }
}

/// Fetch a repository into `dest` (which must be empty or absent) and check
/// out the requested revision, preferring a shallow fetch. Returns the
/// checkout with its resolved commit id; on failure `dest` is cleaned up.
pub fn fetch_repository(locator: &str, revision: Option<&str>, dest: &Path) -> Result<FetchedSource, IngestError> {
    let (clone_url, url_rev, subpath) = parse_locator(locator);
    let rev = revision.map(str::to_string).or(url_rev);

    let existed = dest.exists();
    if existed {
        let mut entries =
            std::fs::read_dir(dest).map_err(|e| IngestError::UnreadableRoot(dest.to_path_buf(), e))?;
        if entries.next().is_some() {
            return Err(IngestError::DestinationNotEmpty(dest.to_path_buf()));
        }
    } else {
        std::fs::create_dir_all(dest).map_err(|source| IngestError::Io {
            path: dest.to_path_buf(),
            source,
        })?;
    }

    let result = fetch_into(&clone_url, locator, rev.as_deref(), subpath.as_deref(), dest);
    if result.is_err() {
        let _ = std::fs::remove_dir_all(dest);
        if existed {
            let _ = std::fs::create_dir_all(dest);
        }
    }
    result
}

fn fetch_into(
    clone_url: &str,
    locator: &str,
    rev: Option<&str>,
    subpath: Option<&str>,
    dest: &Path,
) -> Result<FetchedSource, IngestError> {
    let git = Git { cwd: dest };
    let mut warnings = Vec::new();

    if let Err(detail) = git.run(&["--version"]) {
        return Err(IngestError::GitUnavailable(detail));
    }
    let fetch_err = |detail: String| IngestError::Fetch {
        locator: locator.to_string(),
        detail: detail.trim().to_string(),
    };
    git.run(&["init", "-q"]).map_err(fetch_err)?;
    git.run(&["remote", "add", "origin", clone_url]).map_err(fetch_err)?;

    match rev {
        Some(r) => {
            let revision_err = |detail: String| IngestError::Revision {
                locator: locator.to_string(),
                revision: r.to_string(),
                detail: detail.trim().to_string(),
            };
            match git.run(&["fetch", "-q", "--depth", "1", "origin", r]) {
                Ok(_) => {
                    git.run(&["checkout", "-q", "--detach", "FETCH_HEAD"]).map_err(fetch_err)?;
                }
                Err(detail) if revision_problem(&detail) && looks_like_sha(r) => {
                    // Some servers refuse direct commit-id fetches; fall back
                    // to a full fetch and check the commit out locally.
                    git.run(&["fetch", "-q", "origin"]).map_err(fetch_err)?;
                    git.run(&["checkout", "-q", "--detach", r]).map_err(revision_err)?;
                }
                Err(detail) if revision_problem(&detail) => return Err(revision_err(detail)),
                Err(detail) => return Err(fetch_err(detail)),
            }
        }
        None => {
            git.run(&["fetch", "-q", "--depth", "1", "origin", "HEAD"]).map_err(fetch_err)?;
            git.run(&["checkout", "-q", "--detach", "FETCH_HEAD"]).map_err(fetch_err)?;
            warnings.push("no revision pinned; this snapshot is not reproducible".to_string());
        }
    }

    let resolved = git.run(&["rev-parse", "HEAD"]).map_err(fetch_err)?.trim().to_string();
    let checkout_root = match subpath {
        Some(sub) => {
            let joined = dest.join(sub);
            if !joined.is_dir() {
                return Err(fetch_err(format!("locator subpath {sub:?} does not exist in the checkout")));
            }
            joined
        }
        None => dest.to_path_buf(),
    };
    Ok(FetchedSource {
        repo: RepoRef {
            locator: locator.to_string(),
            name: repo_name(clone_url),
            revision: Some(resolved),
        },
        checkout_root,
        warnings,
    })
}

/// Collect the distinct extensions (lowercased) present in a manifest; handy
/// for diagnostics.
pub fn extensions_present(manifest: &ScanManifest) -> BTreeSet<String> {
    manifest
        .files
        .iter()
        .filter_map(|f| f.path.rsplit_once('.').map(|(_, ext)| ext.to_lowercase()))
        .collect()
}
