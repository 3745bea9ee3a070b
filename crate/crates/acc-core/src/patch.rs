//! Unified-diff normalization for patch-answer comparison.
//!
//! Two patches are considered equivalent when they add and remove the same
//! lines in the same files, regardless of hunk ordering, context lines,
//! header noise, or whitespace-only differences. A patch normalizes to the
//! set of (file, added/removed, normalized line) changes; set equality is
//! the comparison.

use std::collections::BTreeSet;

/// Whether a change line adds or removes content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ChangeKind {
    Add,
    Remove,
}

/// A normalized patch: the set of changes it makes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PatchSummary {
    pub changes: BTreeSet<(String, ChangeKind, String)>,
}

impl PatchSummary {
    /// True when the text parsed to no attributable change lines, e.g.
    /// because it was not a diff at all.
    pub fn is_empty(&self) -> bool {
        self.changes.is_empty()
    }
}

/// Collapses runs of whitespace and trims, so whitespace-only differences
/// do not distinguish two lines.
fn normalize_line(line: &str) -> String {
    line.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Strips one `a/` or `b/` prefix from a diff path.
fn strip_diff_prefix(path: &str) -> &str {
    path.strip_prefix("a/")
        .or_else(|| path.strip_prefix("b/"))
        .unwrap_or(path)
}

/// Parses a unified diff into its change set.
///
/// Tolerates `<patch>` wrappers, `diff --git` headers, and missing hunk
/// headers. Change lines seen before any file header cannot be attributed
/// and are ignored, as are changes that normalize to the empty line.
pub fn normalize_patch(text: &str) -> PatchSummary {
    let body = text
        .trim()
        .trim_start_matches("<patch>")
        .trim_end_matches("</patch>")
        .trim();

    let mut changes = BTreeSet::new();
    let mut current_file: Option<String> = None;
    let mut old_file: Option<String> = None;
    for line in body.lines() {
        if let Some(rest) = line.strip_prefix("diff --git ") {
            // "diff --git a/path b/path" — the b-side names the file.
            if let Some(last) = rest.split_whitespace().last() {
                current_file = Some(strip_diff_prefix(last).to_string());
            }
            old_file = None;
        } else if let Some(rest) = line.strip_prefix("--- ") {
            let path = rest.trim();
            old_file = (path != "/dev/null").then(|| strip_diff_prefix(path).to_string());
        } else if let Some(rest) = line.strip_prefix("+++ ") {
            let path = rest.trim();
            if path == "/dev/null" {
                // Deletion: the old side names the file.
                current_file = old_file.clone();
            } else {
                current_file = Some(strip_diff_prefix(path).to_string());
            }
        } else if line.starts_with("@@") || line.starts_with("index ") {
            // Hunk headers and index lines carry no content.
        } else if let Some(added) = line.strip_prefix('+') {
            push_change(&mut changes, &current_file, ChangeKind::Add, added);
        } else if let Some(removed) = line.strip_prefix('-') {
            push_change(&mut changes, &current_file, ChangeKind::Remove, removed);
        }
    }
    PatchSummary { changes }
}

fn push_change(
    changes: &mut BTreeSet<(String, ChangeKind, String)>,
    file: &Option<String>,
    kind: ChangeKind,
    content: &str,
) {
    let Some(file) = file else { return };
    let normalized = normalize_line(content);
    if normalized.is_empty() {
        return;
    }
    changes.insert((file.clone(), kind, normalized));
}

/// Compares two patch texts by their normalized change sets. When neither
/// text parses as a diff, falls back to comparing the texts themselves
/// (whitespace-collapsed) so that non-diff answers still compare sanely;
/// when exactly one side parses, they cannot match.
pub fn patches_equivalent(a: &str, b: &str) -> bool {
    let pa = normalize_patch(a);
    let pb = normalize_patch(b);
    match (pa.is_empty(), pb.is_empty()) {
        (true, true) => normalize_line(a) == normalize_line(b),
        (false, false) => pa == pb,
        _ => false,
    }
}
