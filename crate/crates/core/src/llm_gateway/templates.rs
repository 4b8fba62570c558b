//! Prompt bodies and placeholder substitution.
//!
//! Bodies keep the line layout of the published prompts; only `{name}`
//! placeholders listed for a template are substituted. Other braces, such as
//! the `[{ ... }]` output example, are literal.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    SystemLlm,
    SystemAppstore,
    RefineSingle,
    RefineContext,
    Extract,
    /// Extraction with the super-feature and sibling block in front.
    ExtractContext,
    Select,
}

impl TemplateId {
    pub const ALL: [TemplateId; 7] = [
        TemplateId::SystemLlm,
        TemplateId::SystemAppstore,
        TemplateId::RefineSingle,
        TemplateId::RefineContext,
        TemplateId::Extract,
        TemplateId::ExtractContext,
        TemplateId::Select,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::SystemLlm => "system_llm",
            TemplateId::SystemAppstore => "system_appstore",
            TemplateId::RefineSingle => "refine_single",
            TemplateId::RefineContext => "refine_context",
            TemplateId::Extract => "extract",
            TemplateId::ExtractContext => "extract_context",
            TemplateId::Select => "select",
        }
    }

    pub fn body(self) -> &'static str {
        match self {
            TemplateId::SystemLlm => SYSTEM_LLM,
            TemplateId::SystemAppstore => SYSTEM_APPSTORE,
            TemplateId::RefineSingle => REFINE_SINGLE,
            TemplateId::RefineContext => REFINE_CONTEXT,
            TemplateId::Extract => EXTRACT,
            TemplateId::ExtractContext => EXTRACT_CONTEXT,
            TemplateId::Select => SELECT,
        }
    }

    pub fn placeholders(self) -> &'static [&'static str] {
        match self {
            TemplateId::SystemLlm | TemplateId::SystemAppstore => &[],
            TemplateId::RefineSingle => &["feature", "feature_description", "n"],
            TemplateId::RefineContext => &[
                "super_feature",
                "super_feature_description",
                "sub_features",
                "n",
                "feature_with_desc",
            ],
            TemplateId::Extract => &["app_description", "feature_with_desc"],
            TemplateId::ExtractContext => &[
                "super_feature",
                "super_feature_description",
                "sub_features",
                "app_description",
                "feature_with_desc",
            ],
            TemplateId::Select => &["features", "n", "feature_with_desc"],
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

const SYSTEM_LLM: &str = "You are an expert in mobile app development and requirements engineering.
You excel at decomposing high-level features into detailed sub-features.";

const SYSTEM_APPSTORE: &str = "You are an expert in mobile app development and requirements engineering.
You excel at decomposing high-level features into detailed sub-features.
Additionally, your expertise extends to extracting app features from descriptions, enabling you to identify key functionalities like \"step count\", \"group chats\", and \"multi-device synchronization\".";

const REFINE_SINGLE: &str = r#"**Feature**

```

{feature}: {feature_description}

```

Given the mobile app feature above, please refine it to a list of sub-features.

Ensure that the number of sub-features is {n}.

The output should be a list of JSON formatted objects like this:

[{
"sub-feature": sub-feature,
"description": description
}]"#;

const REFINE_CONTEXT: &str = r#"**Super Feature**

```

super-feature: {super_feature}

description: {super_feature_description}

```


Knowing that the feature "{super_feature}" above is refined into a list of the following features:

```

{sub_features}

```

Please refine the following feature to a list of sub-features.

Ensure that the number of sub-features is {n}.

**Feature**

```

{feature_with_desc}

```


The output should be a list of JSON formatted objects like this:

[{
"sub-feature": sub-feature,
"description": description
}]"#;

const EXTRACT: &str = r#"**App description**

```

{app_description}

```

From the app description above, please extract the sub-features of this following feature.

Ensure that all sub-features are from the app description.

**Feature**

```

{feature_with_desc}

```

The output should be a list of JSON formatted objects like this:

[{
"sub-feature": sub-feature,
"description": description
}]"#;

const EXTRACT_CONTEXT: &str = r#"**Super Feature**

```

super-feature: {super_feature}

description: {super_feature_description}

```


Knowing that the feature "{super_feature}" above is refined into a list of the following features:

```

{sub_features}

```

**App description**

```

{app_description}

```

From the app description above, please extract the sub-features of this following feature.

Ensure that all sub-features are from the app description.

**Feature**

```

{feature_with_desc}

```

The output should be a list of JSON formatted objects like this:

[{
"sub-feature": sub-feature,
"description": description
}]"#;

const SELECT: &str = r#"```json

{features}

```

Given the JSON lists of app features provided above, please combine them into a single list.

Ensure that similar sub-features are merged into one.

You should only keep {n} sub-features that are most relevant to the following feature description:

```

{feature_with_desc}

```

The output should be a list of JSON formatted objects like this:

[{
"sub-feature": sub-feature,
"description": description,
"source-app-id": source-app-id
}]"#;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RenderError {
    #[error("template {template}: no binding for placeholder {{{placeholder}}}")]
    MissingBinding { template: TemplateId, placeholder: String },
}

pub type Bindings = HashMap<&'static str, String>;

/// Substitute the template's placeholders in one left-to-right pass; bound
/// values are never re-scanned.
pub fn render(template: TemplateId, bindings: &Bindings) -> Result<String, RenderError> {
    let names = template.placeholders();
    for name in names {
        if !bindings.contains_key(name) {
            return Err(RenderError::MissingBinding {
                template,
                placeholder: name.to_string(),
            });
        }
    }

    let body = template.body();
    let mut out = String::with_capacity(body.len() + bindings.values().map(String::len).sum::<usize>());
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let matched = after.find('}').and_then(|close| {
            let name = &after[..close];
            names.iter().find(|n| **n == name).map(|n| (close, *n))
        });
        match matched {
            Some((close, name)) => {
                out.push_str(&bindings[name]);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}
