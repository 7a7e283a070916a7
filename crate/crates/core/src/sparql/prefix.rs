use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Bidirectional prefix table. Unknown namespaces receive generated labels
/// `ns1`, `ns2`, ... in order of first use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrefixTable {
    labels: BTreeMap<String, String>,
}

impl Default for PrefixTable {
    fn default() -> Self {
        PrefixTable::from_pairs([
            ("dbo", "http://dbpedia.org/ontology/"),
            ("dbp", "http://dbpedia.org/property/"),
            ("dbr", "http://dbpedia.org/resource/"),
        ])
    }
}

impl PrefixTable {
    pub fn empty() -> Self {
        PrefixTable { labels: BTreeMap::new() }
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        PrefixTable { labels: pairs.into_iter().map(|(l, n)| (l.to_string(), n.to_string())).collect() }
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn insert(&mut self, label: &str, namespace: &str) {
        self.labels.insert(label.to_string(), namespace.to_string());
    }

    pub fn namespace(&self, label: &str) -> Option<&str> {
        self.labels.get(label).map(String::as_str)
    }

    /// Smallest label bound to `namespace`.
    pub fn label(&self, namespace: &str) -> Option<&str> {
        self.labels.iter().find(|(_, ns)| ns.as_str() == namespace).map(|(l, _)| l.as_str())
    }

    pub(crate) fn label_or_insert(&mut self, namespace: &str) -> String {
        if let Some(l) = self.label(namespace) {
            return l.to_string();
        }
        let label = (1..).map(|i| format!("ns{i}")).find(|l| !self.labels.contains_key(l)).unwrap();
        self.labels.insert(label.clone(), namespace.to_string());
        label
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.labels.iter().map(|(l, n)| (l.as_str(), n.as_str()))
    }
}

/// Splits an IRI after its last `/` or `#`. `None` when either half would be empty.
pub fn split_iri(iri: &str) -> Option<(&str, &str)> {
    let cut = iri.rfind(['/', '#'])? + 1;
    let (ns, local) = iri.split_at(cut);
    if local.is_empty() || ns.is_empty() {
        None
    } else {
        Some((ns, local))
    }
}
