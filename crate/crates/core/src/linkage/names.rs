use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::LinkageError;

/// Dutch surname particles absorbed into the last name.
pub const DEFAULT_INFIXES: &[&str] = &[
    "van", "de", "der", "den", "van der", "van den", "van de", "ten", "ter", "te", "op", "in", "'t",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameParts {
    pub raw: String,
    pub normalized: String,
    pub prefix: String,
    pub lastname: String,
}

/// Lowercase, turn periods and commas into separators, collapse whitespace.
/// Diacritics are kept.
pub fn normalize(surface: &str) -> String {
    let lowered: String = surface
        .chars()
        .map(|c| if c == '.' || c == ',' { ' ' } else { c })
        .collect::<String>()
        .to_lowercase();
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfixSet(HashSet<String>);

impl Default for InfixSet {
    fn default() -> Self {
        Self::new(DEFAULT_INFIXES)
    }
}

impl InfixSet {
    /// Multi-token entries such as `"van der"` contribute each of their tokens.
    pub fn new<I, S>(infixes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self(
            infixes
                .into_iter()
                .flat_map(|s| normalize(s.as_ref()).split(' ').map(str::to_string).collect::<Vec<_>>())
                .filter(|s| !s.is_empty())
                .collect(),
        )
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }
}

/// Greedy right-to-left split: the last token plus the contiguous run of
/// infix tokens before it form the last name, the rest is the prefix.
pub fn split_name(surface: &str, infixes: &InfixSet) -> Result<NameParts, LinkageError> {
    let normalized = normalize(surface);
    if normalized.is_empty() {
        return Err(LinkageError::EmptyName(surface.to_string()));
    }
    let tokens: Vec<&str> = normalized.split(' ').collect();
    let mut start = tokens.len() - 1;
    while start > 0 && infixes.contains(tokens[start - 1]) {
        start -= 1;
    }
    Ok(NameParts {
        raw: surface.to_string(),
        prefix: tokens[..start].join(" "),
        lastname: tokens[start..].join(" "),
        normalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split(s: &str) -> (String, String) {
        let p = split_name(s, &InfixSet::default()).unwrap();
        (p.prefix, p.lastname)
    }

    #[test]
    fn examples() {
        assert_eq!(split("Dhr S. Valkema"), ("dhr s".into(), "valkema".into()));
        assert_eq!(split("Gerrit van der Berg"), ("gerrit".into(), "van der berg".into()));
        assert_eq!(split("Valkema"), ("".into(), "valkema".into()));
        assert_eq!(split("S.Valkema"), ("s".into(), "valkema".into()));
        assert_eq!(split("Jan 't Hart"), ("jan".into(), "'t hart".into()));
        assert_eq!(split("Van Gogh"), ("".into(), "van gogh".into()));
        assert_eq!(split("Émile  Gallé"), ("émile".into(), "gallé".into()));
    }

    #[test]
    fn empty_names_rejected() {
        assert!(matches!(
            split_name(" . , ", &InfixSet::default()),
            Err(LinkageError::EmptyName(_))
        ));
        assert!(split_name("", &InfixSet::default()).is_err());
    }

    #[test]
    fn custom_infixes() {
        let infixes = InfixSet::new(["von", "zu"]);
        let p = split_name("Otto von zu Berg", &infixes).unwrap();
        assert_eq!(p.lastname, "von zu berg");
        let p = split_name("Gerrit van der Berg", &infixes).unwrap();
        assert_eq!(p.lastname, "berg");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn parts_reassemble(s in "[A-Za-zé.,' ]{1,30}") {
                if let Ok(p) = split_name(&s, &InfixSet::default()) {
                    prop_assert!(!p.lastname.is_empty());
                    let joined = if p.prefix.is_empty() {
                        p.lastname.clone()
                    } else {
                        format!("{} {}", p.prefix, p.lastname)
                    };
                    prop_assert_eq!(joined, p.normalized);
                }
            }
        }
    }
}
