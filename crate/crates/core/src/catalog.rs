//! Low-credibility news source catalogs: provider tag rules, domain
//! normalization and URL lookup.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("bad row {line} in {path}: {reason}")]
    BadRow {
        path: PathBuf,
        line: u64,
        reason: String,
    },
    #[error("unknown {provider} tag `{tag}`")]
    UnknownTag { provider: Provider, tag: String },
    #[error("unparsable url `{0}`")]
    UnparsableUrl(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Unreliable,
    Conspiracy,
    Clickbait,
    PoliticalBiased,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Unreliable,
        Category::Conspiracy,
        Category::Clickbait,
        Category::PoliticalBiased,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Unreliable => "unreliable",
            Category::Conspiracy => "conspiracy",
            Category::Clickbait => "clickbait",
            Category::PoliticalBiased => "political_biased",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Set of misinformation categories; empty means "not misinformation".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct CategorySet(u8);

impl CategorySet {
    pub const EMPTY: CategorySet = CategorySet(0);

    pub fn of(cats: &[Category]) -> CategorySet {
        cats.iter().fold(CategorySet::EMPTY, |s, c| s.with(*c))
    }

    pub fn with(self, c: Category) -> CategorySet {
        CategorySet(self.0 | c.bit())
    }

    pub fn insert(&mut self, c: Category) {
        self.0 |= c.bit();
    }

    pub fn contains(self, c: Category) -> bool {
        self.0 & c.bit() != 0
    }

    pub fn union(self, o: CategorySet) -> CategorySet {
        CategorySet(self.0 | o.0)
    }

    pub fn is_subset(self, o: CategorySet) -> bool {
        self.0 & !o.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Category> {
        Category::ALL.into_iter().filter(move |c| self.contains(*c))
    }
}

impl FromIterator<Category> for CategorySet {
    fn from_iter<I: IntoIterator<Item = Category>>(iter: I) -> Self {
        iter.into_iter().fold(CategorySet::EMPTY, |s, c| s.with(c))
    }
}

impl Serialize for CategorySet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for CategorySet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Vec::<Category>::deserialize(d)?.into_iter().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provider {
    Mbfc,
    Newsguard,
    Zimdars,
}

impl Provider {
    pub const ALL: [Provider; 3] = [Provider::Mbfc, Provider::Newsguard, Provider::Zimdars];

    pub fn name(self) -> &'static str {
        match self {
            Provider::Mbfc => "mbfc",
            Provider::Newsguard => "newsguard",
            Provider::Zimdars => "zimdars",
        }
    }

    /// Every tag the provider is known to use, with its category (if any).
    pub fn vocabulary(self) -> &'static [(&'static str, Option<Category>)] {
        use Category::*;
        match self {
            Provider::Mbfc => &[
                ("low", Some(Unreliable)),
                ("very-low", Some(Unreliable)),
                ("mixed", None),
                ("mostly-factual", None),
                ("high", None),
                ("very-high", None),
            ],
            Provider::Newsguard => &[("covid-false", Some(Unreliable))],
            Provider::Zimdars => &[
                ("fake", Some(Unreliable)),
                ("rumor", Some(Unreliable)),
                ("unreliable", Some(Unreliable)),
                ("satire", Some(Unreliable)),
                ("conspiracy", Some(Conspiracy)),
                ("junksci", Some(Conspiracy)),
                ("clickbait", Some(Clickbait)),
                ("bias", Some(PoliticalBiased)),
                ("political", Some(PoliticalBiased)),
                ("hate", None),
                ("state", None),
                ("reliable", None),
            ],
        }
    }
}

impl fmt::Display for Provider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Provider {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mbfc" => Ok(Provider::Mbfc),
            "newsguard" => Ok(Provider::Newsguard),
            "zimdars" => Ok(Provider::Zimdars),
            other => Err(format!("unknown provider `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagMode {
    #[default]
    Strict,
    Lenient,
}

fn normalize_tag(tag: &str) -> String {
    tag.trim().to_ascii_lowercase().replace([' ', '_'], "-")
}

/// Maps one provider's tag set for a source to categories. A zimdars set of
/// exactly `{political}` maps to the empty set.
pub fn categorize_tags<S: AsRef<str>>(
    provider: Provider,
    tags: &[S],
    mode: TagMode,
) -> Result<CategorySet, CatalogError> {
    let normalized: BTreeSet<String> = tags
        .iter()
        .map(|t| normalize_tag(t.as_ref()))
        .filter(|t| !t.is_empty())
        .collect();
    if provider == Provider::Zimdars && normalized.len() == 1 && normalized.contains("political") {
        return Ok(CategorySet::EMPTY);
    }
    let vocab = provider.vocabulary();
    let mut set = CategorySet::EMPTY;
    for tag in &normalized {
        match vocab.iter().find(|(t, _)| t == tag) {
            Some((_, Some(cat))) => set.insert(*cat),
            Some((_, None)) => {}
            None => match mode {
                TagMode::Strict => {
                    return Err(CatalogError::UnknownTag {
                        provider,
                        tag: tag.clone(),
                    })
                }
                TagMode::Lenient => log::warn!("skipping unknown {provider} tag `{tag}`"),
            },
        }
    }
    Ok(set)
}

/// Host of a URL, lowercased, without a leading `www.`, port or path.
/// The scheme is optional.
pub fn normalize_domain(input: &str) -> Result<String, CatalogError> {
    let trimmed = input.trim();
    if trimmed.is_empty() {
        return Err(CatalogError::UnparsableUrl(input.to_string()));
    }
    let with_scheme = if trimmed.contains("://") {
        trimmed.to_string()
    } else {
        format!("http://{trimmed}")
    };
    let parsed = url::Url::parse(&with_scheme)
        .map_err(|_| CatalogError::UnparsableUrl(input.to_string()))?;
    let host = match parsed.host() {
        Some(url::Host::Domain(d)) => d.trim_end_matches('.').to_ascii_lowercase(),
        Some(other) => other.to_string(),
        None => return Err(CatalogError::UnparsableUrl(input.to_string())),
    };
    let host = host.strip_prefix("www.").unwrap_or(&host).to_string();
    if host.is_empty() {
        return Err(CatalogError::UnparsableUrl(input.to_string()));
    }
    Ok(host)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub categories: CategorySet,
    pub providers: BTreeSet<Provider>,
    /// `provider:tag` strings as listed.
    pub raw_tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogMatch<'a> {
    pub domain: &'a str,
    pub entry: &'a CatalogEntry,
}

/// Merged multi-provider map from normalized domain to categories.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceCatalog {
    entries: BTreeMap<String, CatalogEntry>,
    aliases: HashMap<String, String>,
}

#[derive(Debug, Deserialize)]
struct CatalogRow {
    domain: String,
    provider: String,
    #[serde(default)]
    tags: String,
}

#[derive(Debug, Deserialize)]
struct AliasRow {
    alias: String,
    canonical: String,
}

/// One listing: provider, domain and its tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Listing {
    pub domain: String,
    pub provider: Provider,
    pub tags: Vec<String>,
}

impl SourceCatalog {
    /// Merges listings. Tags are pooled per (domain, provider) before the
    /// provider rules apply; categories are then unioned across providers.
    pub fn from_listings(
        listings: &[Listing],
        mode: TagMode,
    ) -> Result<SourceCatalog, CatalogError> {
        let mut pooled: BTreeMap<(String, Provider), BTreeSet<String>> = BTreeMap::new();
        for l in listings {
            let domain = normalize_domain(&l.domain)?;
            pooled.entry((domain, l.provider)).or_default().extend(
                l.tags
                    .iter()
                    .map(|t| normalize_tag(t))
                    .filter(|t| !t.is_empty()),
            );
        }
        let mut entries: BTreeMap<String, CatalogEntry> = BTreeMap::new();
        for ((domain, provider), tags) in pooled {
            let tags: Vec<String> = tags.into_iter().collect();
            let cats = categorize_tags(provider, &tags, mode)?;
            if cats.is_empty() {
                continue;
            }
            let entry = entries.entry(domain).or_insert_with(|| CatalogEntry {
                categories: CategorySet::EMPTY,
                providers: BTreeSet::new(),
                raw_tags: Vec::new(),
            });
            entry.categories = entry.categories.union(cats);
            entry.providers.insert(provider);
            entry
                .raw_tags
                .extend(tags.iter().map(|t| format!("{provider}:{t}")));
        }
        Ok(SourceCatalog {
            entries,
            aliases: HashMap::new(),
        })
    }

    fn read_listings<R: Read>(reader: R, path: &Path) -> Result<Vec<Listing>, CatalogError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut out = Vec::new();
        for (i, row) in rdr.deserialize::<CatalogRow>().enumerate() {
            let line = i as u64 + 2;
            let bad = |reason: String| CatalogError::BadRow {
                path: path.to_path_buf(),
                line,
                reason,
            };
            let row = row.map_err(|e| bad(e.to_string()))?;
            let provider: Provider = row.provider.parse().map_err(bad)?;
            if row.domain.trim().is_empty() {
                return Err(bad("empty domain".into()));
            }
            normalize_domain(&row.domain).map_err(|e| bad(e.to_string()))?;
            out.push(Listing {
                domain: row.domain,
                provider,
                tags: row.tags.split(';').map(str::to_string).collect(),
            });
        }
        Ok(out)
    }

    /// Loads provider CSVs with header `domain,provider,tags`, tags
    /// separated by `;`. The result does not depend on file order.
    pub fn load(paths: &[PathBuf], mode: TagMode) -> Result<SourceCatalog, CatalogError> {
        let mut listings = Vec::new();
        for path in paths {
            let file = File::open(path).map_err(|source| CatalogError::Io {
                path: path.clone(),
                source,
            })?;
            listings.extend(Self::read_listings(file, path)?);
        }
        SourceCatalog::from_listings(&listings, mode)
    }

    pub fn from_csv_str(csv: &str, mode: TagMode) -> Result<SourceCatalog, CatalogError> {
        let listings = Self::read_listings(csv.as_bytes(), Path::new("<memory>"))?;
        SourceCatalog::from_listings(&listings, mode)
    }

    /// Loads `alias,canonical` rows mapping short or mirror hosts onto
    /// catalog domains.
    pub fn with_aliases_file(mut self, path: &Path) -> Result<SourceCatalog, CatalogError> {
        let file = File::open(path).map_err(|source| CatalogError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(file);
        for (i, row) in rdr.deserialize::<AliasRow>().enumerate() {
            let bad = |reason: String| CatalogError::BadRow {
                path: path.to_path_buf(),
                line: i as u64 + 2,
                reason,
            };
            let row = row.map_err(|e| bad(e.to_string()))?;
            let alias = normalize_domain(&row.alias).map_err(|e| bad(e.to_string()))?;
            let canonical = normalize_domain(&row.canonical).map_err(|e| bad(e.to_string()))?;
            self.aliases.insert(alias, canonical);
        }
        Ok(self)
    }

    pub fn with_alias(
        mut self,
        alias: &str,
        canonical: &str,
    ) -> Result<SourceCatalog, CatalogError> {
        self.aliases
            .insert(normalize_domain(alias)?, normalize_domain(canonical)?);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &BTreeMap<String, CatalogEntry> {
        &self.entries
    }

    pub fn get(&self, domain: &str) -> Option<&CatalogEntry> {
        self.entries.get(domain)
    }

    /// Exact host first, then the host with leftmost labels stripped one at
    /// a time (down to two labels).
    pub fn lookup(&self, url: &str) -> Option<CatalogMatch<'_>> {
        let host = normalize_domain(url).ok()?;
        let host = self.aliases.get(&host).cloned().unwrap_or(host);
        let mut candidate = host.as_str();
        loop {
            if let Some((domain, entry)) = self.entries.get_key_value(candidate) {
                return Some(CatalogMatch { domain, entry });
            }
            match candidate.split_once('.') {
                Some((_, rest)) if rest.contains('.') => candidate = rest,
                _ => return None,
            }
        }
    }

    pub fn categories_of(&self, url: &str) -> Option<CategorySet> {
        self.lookup(url).map(|m| m.entry.categories)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Category::*;

    fn cats(provider: Provider, tags: &[&str]) -> CategorySet {
        categorize_tags(provider, tags, TagMode::Strict).unwrap()
    }

    #[test]
    fn domain_normalization() {
        assert_eq!(
            normalize_domain("https://WWW.Example.com/a?b=1").unwrap(),
            "example.com"
        );
        assert_eq!(normalize_domain("example.com/path").unwrap(), "example.com");
        assert_eq!(
            normalize_domain("http://m.sub.news.org:8080/x").unwrap(),
            "m.sub.news.org"
        );
        assert!(normalize_domain("").is_err());
        assert!(normalize_domain("mailto:someone").is_err());
        assert!(normalize_domain("http://").is_err());
    }

    #[test]
    fn tag_examples() {
        assert_eq!(
            cats(Provider::Zimdars, &["fake"]),
            CategorySet::of(&[Unreliable])
        );
        assert_eq!(cats(Provider::Zimdars, &["political"]), CategorySet::EMPTY);
        assert_eq!(
            cats(Provider::Zimdars, &["conspiracy", "clickbait"]),
            CategorySet::of(&[Conspiracy, Clickbait])
        );
        assert_eq!(
            cats(Provider::Zimdars, &["political", "clickbait"]),
            CategorySet::of(&[PoliticalBiased, Clickbait])
        );
        assert_eq!(
            cats(Provider::Mbfc, &["Very Low"]),
            CategorySet::of(&[Unreliable])
        );
        assert_eq!(cats(Provider::Mbfc, &["mixed"]), CategorySet::EMPTY);
        assert_eq!(
            cats(Provider::Newsguard, &["covid-false"]),
            CategorySet::of(&[Unreliable])
        );
    }

    #[test]
    fn unknown_tags() {
        assert!(matches!(
            categorize_tags(Provider::Zimdars, &["made-up"], TagMode::Strict),
            Err(CatalogError::UnknownTag { .. })
        ));
        assert_eq!(
            categorize_tags(Provider::Zimdars, &["made-up", "fake"], TagMode::Lenient).unwrap(),
            CategorySet::of(&[Unreliable])
        );
    }

    #[test]
    fn union_across_providers() {
        let csv = "domain,provider,tags\nbadnews.org,zimdars,fake\nwww.BadNews.org,mbfc,low\n";
        let c = SourceCatalog::from_csv_str(csv, TagMode::Strict).unwrap();
        let e = c.get("badnews.org").unwrap();
        assert_eq!(e.categories, CategorySet::of(&[Unreliable]));
        assert_eq!(
            e.providers,
            [Provider::Mbfc, Provider::Zimdars].into_iter().collect()
        );
    }

    #[test]
    fn solely_political_dropped_and_empty() {
        let csv = "domain,provider,tags\npartisan.com,zimdars,political\n";
        assert!(SourceCatalog::from_csv_str(csv, TagMode::Strict)
            .unwrap()
            .is_empty());
        assert!(
            SourceCatalog::from_csv_str("domain,provider,tags\n", TagMode::Strict)
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn political_pooled_across_rows() {
        let csv = "domain,provider,tags\np.com,zimdars,political\np.com,zimdars,clickbait\n";
        let c = SourceCatalog::from_csv_str(csv, TagMode::Strict).unwrap();
        assert_eq!(
            c.get("p.com").unwrap().categories,
            CategorySet::of(&[PoliticalBiased, Clickbait])
        );
    }

    #[test]
    fn file_order_irrelevant() {
        let a = "domain,provider,tags\nx.org,zimdars,fake;bias\ny.org,newsguard,covid-false\n";
        let b = "domain,provider,tags\ny.org,newsguard,covid-false\nx.org,zimdars,bias;fake\n";
        assert_eq!(
            SourceCatalog::from_csv_str(a, TagMode::Strict).unwrap(),
            SourceCatalog::from_csv_str(b, TagMode::Strict).unwrap()
        );
    }

    #[test]
    fn bad_rows() {
        let csv = "domain,provider,tags\nx.org,snopes,fake\n";
        assert!(matches!(
            SourceCatalog::from_csv_str(csv, TagMode::Strict),
            Err(CatalogError::BadRow { line: 2, .. })
        ));
    }

    #[test]
    fn lookup_rules() {
        let csv = "domain,provider,tags\nbadnews.org,zimdars,fake\n";
        let c = SourceCatalog::from_csv_str(csv, TagMode::Strict).unwrap();
        let u = CategorySet::of(&[Unreliable]);
        assert_eq!(c.categories_of("https://badnews.org/story"), Some(u));
        assert_eq!(c.categories_of("https://m.badnews.org/story"), Some(u));
        assert_eq!(
            c.lookup("https://m.badnews.org/story").unwrap().domain,
            "badnews.org"
        );
        assert_eq!(c.categories_of("https://reputable.org/x"), None);
        assert_eq!(c.categories_of("https://org/x"), None);
        assert_eq!(c.categories_of("not a url at all"), None);

        let c = c.with_alias("bn.ws", "badnews.org").unwrap();
        assert_eq!(c.categories_of("https://bn.ws/abc"), Some(u));
    }

    #[test]
    fn category_set_serde() {
        let s = CategorySet::of(&[PoliticalBiased, Unreliable]);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"["unreliable","political_biased"]"#);
        assert_eq!(serde_json::from_str::<CategorySet>(&json).unwrap(), s);
    }
}
