//! Single refinement calls: LLM refinement, extraction, selection and the
//! AppStore map-reduce built from them.

use std::collections::BTreeSet;

use crate::corpus::{AppRecord, Corpus};
use crate::llm_gateway::{render, Bindings, FeatureListReply, Gateway, TemplateId};
use crate::vectorindex::{build_query, EmbeddingProvider, VectorIndex};

use super::{Feature, RefineError, SubFeature};

/// The super feature and sibling features of the feature being refined.
#[derive(Debug, Clone, Copy)]
pub struct Context<'a> {
    pub super_feature: &'a Feature,
    /// Features at the target's level, normally including the target.
    pub siblings: &'a [Feature],
}

/// What the AppStore pipeline needs besides the gateway.
#[derive(Clone, Copy)]
pub struct AppStoreDeps<'a> {
    pub index: &'a VectorIndex,
    pub embedder: &'a dyn EmbeddingProvider,
    pub corpus: &'a Corpus,
}

/// Result of one refinement call.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RefineOutcome {
    pub items: Vec<SubFeature>,
    pub warnings: Vec<String>,
    /// Fingerprints of every exchange made, in call order.
    pub exchanges: Vec<String>,
    /// Apps retrieved for an AppStore refinement, best first.
    pub retrieved: Vec<String>,
}

impl RefineOutcome {
    fn absorb(&mut self, reply: &FeatureListReply) {
        self.exchanges.extend(reply.exchanges.iter().map(|e| e.fingerprint.clone()));
        self.warnings.extend(reply.parsed.warnings.iter().cloned());
    }
}

/// Parameters shared by every refinement entry point.
#[derive(Debug, Clone, Copy)]
pub struct RefineRequest<'a> {
    pub feature: &'a Feature,
    pub context: Option<Context<'a>>,
    pub n: usize,
    /// Extra instruction appended to the prompt that produces the final list.
    pub feedback: Option<&'a str>,
}

impl<'a> RefineRequest<'a> {
    pub fn new(feature: &'a Feature, n: usize) -> Self {
        Self {
            feature,
            context: None,
            n,
            feedback: None,
        }
    }

    pub fn with_context(mut self, context: Option<Context<'a>>) -> Self {
        self.context = context;
        self
    }

    pub fn with_feedback(mut self, feedback: Option<&'a str>) -> Self {
        self.feedback = feedback.filter(|f| !f.trim().is_empty());
        self
    }
}

fn bindings(pairs: impl IntoIterator<Item = (&'static str, String)>) -> Bindings {
    pairs.into_iter().collect()
}

/// `"name: description"` lines for the sibling block. The target is appended
/// when the caller's list does not already contain it.
fn sibling_block(target: &Feature, siblings: &[Feature]) -> String {
    let mut lines: Vec<String> = siblings.iter().map(Feature::with_desc).collect();
    if !siblings.iter().any(|s| s.name == target.name) {
        lines.push(target.with_desc());
    }
    lines.join("\n")
}

fn context_bindings(target: &Feature, ctx: &Context<'_>) -> [(&'static str, String); 3] {
    [
        ("super_feature", ctx.super_feature.name.clone()),
        ("super_feature_description", ctx.super_feature.description.clone()),
        ("sub_features", sibling_block(target, ctx.siblings)),
    ]
}

fn with_feedback(prompt: String, feedback: Option<&str>) -> String {
    match feedback.map(str::trim).filter(|f| !f.is_empty()) {
        Some(f) => format!("{prompt}\n\n**Analyst feedback**\n{f}"),
        None => prompt,
    }
}

fn check_n(n: usize) -> Result<(), RefineError> {
    if n == 0 {
        return Err(RefineError::InvalidFeature("n must be at least 1".into()));
    }
    Ok(())
}

fn strip_sources(items: &mut [SubFeature]) {
    for item in items {
        item.source_app_id = None;
    }
}

fn llm_refine(template: TemplateId, b: Bindings, n: usize, feedback: Option<&str>, gateway: &Gateway) -> Result<RefineOutcome, RefineError> {
    check_n(n)?;
    let system = render(TemplateId::SystemLlm, &Bindings::new())?;
    let user = with_feedback(render(template, &b)?, feedback);
    let reply = gateway.feature_list(&system, &user, Some(n))?;
    let mut out = RefineOutcome::default();
    out.absorb(&reply);
    out.items = reply.parsed.items;
    strip_sources(&mut out.items);
    Ok(out)
}

/// Refine a feature on its own.
pub fn refine_llm_single(feature: &Feature, n: usize, feedback: Option<&str>, gateway: &Gateway) -> Result<RefineOutcome, RefineError> {
    let b = bindings([
        ("feature", feature.name.clone()),
        ("feature_description", feature.description.clone()),
        ("n", n.to_string()),
    ]);
    llm_refine(TemplateId::RefineSingle, b, n, feedback, gateway)
}

/// Refine a feature given its super feature and siblings.
pub fn refine_llm_context(
    feature: &Feature,
    context: &Context<'_>,
    n: usize,
    feedback: Option<&str>,
    gateway: &Gateway,
) -> Result<RefineOutcome, RefineError> {
    let mut b = bindings(context_bindings(feature, context));
    b.insert("n", n.to_string());
    b.insert("feature_with_desc", feature.with_desc());
    llm_refine(TemplateId::RefineContext, b, n, feedback, gateway)
}

/// Extract sub-features of `feature` from one app description. Every item is
/// attributed to `app`, whatever the model claimed.
pub fn extract_from_description(
    app: &AppRecord,
    feature: &Feature,
    context: Option<&Context<'_>>,
    gateway: &Gateway,
) -> Result<RefineOutcome, RefineError> {
    let mut b = bindings([
        ("app_description", app.description.clone()),
        ("feature_with_desc", feature.with_desc()),
    ]);
    let template = match context {
        Some(ctx) => {
            b.extend(context_bindings(feature, ctx));
            TemplateId::ExtractContext
        }
        None => TemplateId::Extract,
    };
    let system = render(TemplateId::SystemAppstore, &Bindings::new())?;
    let reply = gateway.feature_list(&system, &render(template, &b)?, None)?;
    let mut out = RefineOutcome::default();
    out.absorb(&reply);
    out.items = reply.parsed.items;
    for item in &mut out.items {
        if item.source_app_id.as_deref().is_some_and(|id| id != app.app_id) {
            out.warnings.push(format!(
                "extraction for {}: replaced model-supplied source id on {:?}",
                app.app_id, item.name
            ));
        }
        item.source_app_id = Some(app.app_id.clone());
    }
    Ok(out)
}

/// Sub-features extracted from one app.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateList {
    pub app_id: String,
    pub items: Vec<SubFeature>,
}

/// Merge candidate lists into `n` sub-features. Items whose source id is not
/// one of the candidates' ids are dropped.
pub fn select_sub_features(
    candidates: &[CandidateList],
    feature: &Feature,
    n: usize,
    feedback: Option<&str>,
    gateway: &Gateway,
) -> Result<RefineOutcome, RefineError> {
    check_n(n)?;
    let allowed: BTreeSet<&str> = candidates
        .iter()
        .flat_map(|c| c.items.iter().filter_map(|i| i.source_app_id.as_deref()))
        .collect();
    if allowed.is_empty() {
        return Err(RefineError::NoCandidates {
            detail: format!("{} candidate lists, all empty", candidates.len()),
        });
    }
    let features = candidates
        .iter()
        .filter(|c| !c.items.is_empty())
        .map(|c| serde_json::to_string(&c.items).expect("sub-features serialize"))
        .collect::<Vec<_>>()
        .join("\n");
    let b = bindings([
        ("features", features),
        ("n", n.to_string()),
        ("feature_with_desc", feature.with_desc()),
    ]);
    let system = render(TemplateId::SystemAppstore, &Bindings::new())?;
    let user = with_feedback(render(TemplateId::Select, &b)?, feedback);
    let reply = gateway.feature_list(&system, &user, Some(n))?;

    let mut out = RefineOutcome::default();
    out.absorb(&reply);
    let returned = reply.parsed.items.len();
    for item in reply.parsed.items {
        match item.source_app_id.as_deref() {
            Some(id) if allowed.contains(id) => out.items.push(item),
            other => {
                let warning = format!(
                    "traceability: dropped {:?} citing {}; not among the candidate apps",
                    item.name,
                    other.map_or("no app".to_string(), |id| format!("{id:?}"))
                );
                log::warn!("{warning}");
                out.warnings.push(warning);
            }
        }
    }
    if out.items.is_empty() {
        return Err(RefineError::Selection {
            detail: format!("{returned} items returned, none traceable to {allowed:?}"),
        });
    }
    Ok(out)
}

/// Retrieve the `k` most similar apps, extract from each description in
/// parallel, then select `n` sub-features.
pub fn refine_appstore(
    request: &RefineRequest<'_>,
    k: usize,
    deps: &AppStoreDeps<'_>,
    gateway: &Gateway,
) -> Result<RefineOutcome, RefineError> {
    check_n(request.n)?;
    let query = build_query(request.feature, request.context.map(|c| c.super_feature));
    let hits = deps.index.query(&query, k, deps.embedder)?;
    if hits.is_empty() {
        return Err(RefineError::EmptyRetrieval { query });
    }

    let mut out = RefineOutcome {
        retrieved: hits.iter().map(|h| h.app_id.clone()).collect(),
        ..RefineOutcome::default()
    };
    let ctx = request.context;
    let results: Vec<(String, Option<Result<RefineOutcome, RefineError>>)> = std::thread::scope(|s| {
        let handles: Vec<_> = hits
            .iter()
            .map(|hit| {
                let app = deps.corpus.get(&hit.app_id);
                let id = hit.app_id.clone();
                let handle = app.map(|app| s.spawn(move || extract_from_description(app, request.feature, ctx.as_ref(), gateway)));
                (id, handle)
            })
            .collect();
        handles
            .into_iter()
            .map(|(id, h)| (id, h.map(|h| h.join().expect("extraction thread panicked"))))
            .collect()
    });

    let mut candidates = Vec::new();
    let mut failures = Vec::new();
    for (app_id, result) in results {
        match result {
            None => {
                let w = format!("retrieved app {app_id} is not in the corpus; skipped");
                failures.push(w.clone());
                out.warnings.push(w);
            }
            Some(Err(e)) => {
                let w = format!("extraction from {app_id} failed: {e}");
                log::warn!("{w}");
                failures.push(w.clone());
                out.warnings.push(w);
            }
            Some(Ok(r)) => {
                out.exchanges.extend(r.exchanges);
                out.warnings.extend(r.warnings);
                candidates.push(CandidateList { app_id, items: r.items });
            }
        }
    }
    if candidates.iter().all(|c| c.items.is_empty()) {
        return Err(RefineError::NoCandidates {
            detail: if failures.is_empty() {
                "every extraction returned an empty list".into()
            } else {
                failures.join("; ")
            },
        });
    }

    let selected = select_sub_features(&candidates, request.feature, request.n, request.feedback, gateway)?;
    out.exchanges.extend(selected.exchanges);
    out.warnings.extend(selected.warnings);
    // selection ids are already limited to candidates, which come from the hits
    out.items = selected.items;
    Ok(out)
}
