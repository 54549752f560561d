//! Static autonomy auditing for AI-agent applications.
//!
//! The library inspects an agent application's source code, without running
//! it, and grades five attributes of its autonomy: what actions its agents
//! can take, how contained their environment is, how tightly orchestration
//! bounds their interactions, how much a human stays in the loop, and how
//! observable their behavior is. Each attribute lands on a lower / middle /
//! higher level, or `unknown` when the code shows no relevant signals.
//!
//! The pipeline: [`ingest`] enumerates a source tree into a content-addressed
//! manifest (and can fetch pinned repository snapshots), [`scan`] finds
//! behavior flags in host-language sources, [`rules`] injects framework
//! defaults and applies a declarative rule pack to produce a scorecard,
//! [`report`] renders it, and [`agreement`] computes Fleiss' kappa over
//! human ratings. [`cli`] wires everything into the `autonomy-audit` binary.

pub mod agreement;
pub mod cli;
pub mod ingest;
pub mod report;
pub mod rules;
pub mod scan;

use std::path::Path;

pub use ingest::{enumerate_sources, fetch_repository, FilterSpec, IngestError, RepoRef, ScanManifest};
pub use rules::{
    aggregate_scorecard, autogen_pack, inject_defaults, score_attribute, Attribute, AttributeScore, Level,
    RepoScorecard, RulePack, ScanStats,
};
pub use scan::{scan_file, FlagKind, FlagSite, NormalizedValue};

/// Everything a tree audit produces: the scorecard and the manifest it is
/// keyed to.
#[derive(Debug, Clone)]
pub struct AuditOutcome {
    pub scorecard: RepoScorecard,
    pub manifest: ScanManifest,
}

/// Audit a local source tree end to end: enumerate files, scan host sources
/// for behavior flags, inject framework defaults, and score every attribute.
pub fn audit_tree(root: &Path, repo: RepoRef, filter: &FilterSpec, pack: &RulePack) -> Result<AuditOutcome, IngestError> {
    let enumeration = enumerate_sources(root, repo, filter)?;
    let manifest = enumeration.manifest;
    let mut stats = ScanStats {
        host_files: 0,
        gave_up_files: 0,
        site_count: 0,
        warnings: enumeration.warnings,
    };
    let mut sites: Vec<FlagSite> = Vec::new();
    for file in manifest.host_files() {
        stats.host_files += 1;
        let bytes = match std::fs::read(root.join(&file.path)) {
            Ok(b) => b,
            Err(e) => {
                stats.gave_up_files += 1;
                stats.warnings.push(format!("{}: unreadable at scan time: {e}", file.path));
                continue;
            }
        };
        let outcome = scan::scan_bytes(&bytes, &file.path, pack);
        if outcome.gave_up() {
            stats.gave_up_files += 1;
        }
        stats.warnings.extend(outcome.warnings.iter().map(|w| w.to_string()));
        sites.extend(outcome.sites);
    }
    let sites = inject_defaults(&sites, pack);
    let scorecard = aggregate_scorecard(&manifest, &sites, pack, stats);
    Ok(AuditOutcome { scorecard, manifest })
}
