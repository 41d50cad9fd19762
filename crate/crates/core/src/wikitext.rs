//! Best-effort structural parse of MediaWiki markup.
//!
//! The parser never fails: unbalanced constructs are dropped from the prose
//! and counted in [`WikitextElements::malformed`]. Templates are opaque named
//! nodes; nothing is expanded.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::text::{collapse_whitespace, normalize_sentence};

/// A reference URL together with its registrable domain.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Reference {
    pub url: String,
    pub domain: String,
}

/// Structural elements of one revision's wikitext.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WikitextElements {
    pub sentences: Vec<String>,
    pub categories: BTreeSet<String>,
    pub references: Vec<Reference>,
    pub media: BTreeSet<String>,
    pub templates: BTreeSet<String>,
    pub tags: BTreeSet<String>,
    /// Number of unbalanced or otherwise malformed constructs encountered.
    #[serde(default)]
    pub malformed: usize,
}

const CATEGORY_NS: &[&str] = &["category", "категория"];
const FILE_NS: &[&str] = &["file", "image", "media", "файл", "изображение", "медиа"];
const TEMPLATE_NS: &[&str] = &["template", "шаблон"];
const INTERWIKI: &[&str] = &[
    "w",
    "wikipedia",
    "wikt",
    "wiktionary",
    "commons",
    "c",
    "d",
    "wikidata",
    "s",
    "wikisource",
    "q",
    "wikiquote",
    "n",
    "wikinews",
    "b",
    "wikibooks",
    "v",
    "wikiversity",
    "voy",
    "mw",
    "meta",
    "m",
    "species",
    "incubator",
    "phab",
    "wmf",
];

/// Templates whose URLs are citations rather than structural nodes.
const CITATION_TEMPLATES: &[&str] =
    &["cite", "citation", "книга", "статья", "публикация", "источник", "веб", "газета", "журнал"];

/// Tags whose markup is dropped while their content stays prose.
const FORMATTING_TAGS: &[&str] = &[
    "b",
    "i",
    "u",
    "s",
    "em",
    "strong",
    "small",
    "big",
    "sup",
    "sub",
    "span",
    "div",
    "center",
    "font",
    "code",
    "tt",
    "kbd",
    "var",
    "samp",
    "blockquote",
    "p",
    "abbr",
    "del",
    "ins",
    "q",
    "cite",
    "strike",
    "mark",
    "dfn",
    "bdi",
    "bdo",
    "li",
    "ul",
    "ol",
    "dl",
    "dt",
    "dd",
    "onlyinclude",
    "includeonly",
    "noinclude",
    "section",
    "wbr",
    "hr",
];

/// Tags whose content is not prose and is discarded outright.
const OPAQUE_TAGS: &[&str] = &[
    "math",
    "chem",
    "score",
    "graph",
    "syntaxhighlight",
    "source",
    "gallery",
    "timeline",
    "imagemap",
    "templatedata",
    "mapframe",
    "maplink",
    "hiero",
    "ce",
    "inputbox",
    "categorytree",
    "templatestyles",
    "indicator",
    "table",
    "tr",
    "td",
    "th",
];

/// Tags whose content is kept verbatim.
const LITERAL_TAGS: &[&str] = &["nowiki", "pre", "poem"];

/// Parse wikitext into sentences and structural element sets.
pub fn parse_wikitext(text: &str) -> WikitextElements {
    let text: String = text.nfc().collect();
    let mut parser = Parser::default();
    let without_comments = parser.strip_comments(&text);
    let prose = parser.render(&without_comments, true);
    for line in prose.split('\n') {
        if let Some(block) = block_text(line) {
            parser.out.sentences.extend(segment_sentences(&block));
        }
    }
    parser.out
}

#[derive(Default)]
struct Parser {
    out: WikitextElements,
    seen_urls: BTreeSet<String>,
}

impl Parser {
    fn strip_comments(&mut self, text: &str) -> String {
        let mut out = String::with_capacity(text.len());
        let mut rest = text;
        while let Some(start) = rest.find("<!--") {
            out.push_str(&rest[..start]);
            match rest[start + 4..].find("-->") {
                Some(end) => rest = &rest[start + 4 + end + 3..],
                None => {
                    self.out.malformed += 1;
                    rest = "";
                }
            }
        }
        out.push_str(rest);
        out
    }

    /// Render `text` to prose, harvesting structural elements on the way.
    fn render(&mut self, text: &str, top_level: bool) -> String {
        let bytes = text.as_bytes();
        let mut out = String::with_capacity(text.len());
        let mut i = 0;
        while i < bytes.len() {
            let rest = &text[i..];
            if rest.starts_with("{|") && at_line_start(text, i) {
                i += self.skip_table(rest);
                continue;
            }
            if rest.starts_with("{{") {
                match matching_close(rest, "{{", "}}") {
                    Some(end) => {
                        self.template(&rest[2..end], top_level);
                        i += end + 2;
                    }
                    None => {
                        self.out.malformed += 1;
                        i += 2;
                    }
                }
                continue;
            }
            if rest.starts_with("[[") {
                match matching_close(rest, "[[", "]]") {
                    Some(end) => {
                        let rendered = self.link(&rest[2..end]);
                        out.push_str(&rendered);
                        i += end + 2;
                    }
                    None => {
                        self.out.malformed += 1;
                        i += 2;
                    }
                }
                continue;
            }
            if rest.starts_with('[') && is_url_start(&rest[1..]) {
                if let Some(end) = rest.find(']') {
                    let inner = &rest[1..end];
                    if let Some(space) = inner.find(char::is_whitespace) {
                        let label = self.render(&inner[space..], false);
                        out.push_str(label.trim());
                    }
                    i += end + 1;
                    continue;
                }
            }
            if rest.starts_with('<') {
                if let Some(consumed) = self.tag(rest, &mut out) {
                    i += consumed;
                    continue;
                }
            }
            if rest.starts_with("''") {
                i += rest.bytes().take_while(|&b| b == b'\'').count();
                continue;
            }
            if let Some(len) = magic_word_len(rest) {
                i += len;
                continue;
            }
            let ch = rest.chars().next().unwrap_or_default();
            out.push(ch);
            i += ch.len_utf8();
        }
        out
    }

    fn skip_table(&mut self, rest: &str) -> usize {
        let mut depth = 0usize;
        let mut offset = 0;
        for line in rest.split_inclusive('\n') {
            let trimmed = line.trim_start();
            if trimmed.starts_with("{|") {
                depth += 1;
            } else if trimmed.starts_with("|}") {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    // Consume the closing marker but keep its newline.
                    let close = line.find("|}").unwrap_or(0) + 2;
                    return offset + close;
                }
            }
            offset += line.len();
        }
        self.out.malformed += 1;
        rest.len()
    }

    fn template(&mut self, inner: &str, top_level: bool) {
        let parts = split_top_level(inner, '|');
        let raw_name = parts.first().copied().unwrap_or_default().trim();
        if raw_name.is_empty() || raw_name.starts_with('#') || raw_name.starts_with('{') {
            return;
        }
        let name = strip_namespace(&normalize_title(raw_name), TEMPLATE_NS);
        let lower = name.to_lowercase();
        if CITATION_TEMPLATES.iter().any(|c| lower.starts_with(c)) {
            self.collect_urls(inner);
            return;
        }
        if !top_level {
            return;
        }

        let mut positional = Vec::new();
        let mut named = Vec::new();
        for param in &parts[1..] {
            let (key, value) = match split_top_level(param, '=').as_slice() {
                [key, value @ ..] if !value.is_empty() && !key.contains('{') => {
                    let value_start = key.len() + 1;
                    (Some(collapse_whitespace(key)), collapse_whitespace(&param[value_start..]))
                }
                _ => (None, collapse_whitespace(param)),
            };
            match key {
                Some(key) => named.push((key, value)),
                None => positional.push(value),
            }
            // Nested templates inside parameters are nodes of their own.
            self.nested_templates(param);
        }
        named.sort();

        let mut key = name;
        for value in positional {
            key.push('|');
            key.push_str(&value);
        }
        for (k, v) in named {
            key.push('|');
            key.push_str(&k);
            key.push('=');
            key.push_str(&v);
        }
        self.out.templates.insert(key);
    }

    fn nested_templates(&mut self, text: &str) {
        let mut rest = text;
        while let Some(start) = rest.find("{{") {
            let tail = &rest[start..];
            match matching_close(tail, "{{", "}}") {
                Some(end) => {
                    self.template(&tail[2..end], true);
                    rest = &tail[end + 2..];
                }
                None => break,
            }
        }
    }

    fn link(&mut self, inner: &str) -> String {
        let parts = split_top_level(inner, '|');
        let target = parts.first().copied().unwrap_or_default().trim();
        let label = if parts.len() > 1 { Some(&inner[parts[0].len() + 1..]) } else { None };

        if let Some(colon_link) = target.strip_prefix(':') {
            // [[:Category:X]] is an ordinary link, not a categorisation.
            return match label {
                Some(label) => self.render(label, false),
                None => colon_link.trim().to_string(),
            };
        }

        if let Some((ns, rest)) = target.split_once(':') {
            let ns_lower = ns.trim().to_lowercase();
            if CATEGORY_NS.contains(&ns_lower.as_str()) {
                let name = normalize_title(rest);
                if !name.is_empty() {
                    self.out.categories.insert(name);
                }
                return String::new();
            }
            if FILE_NS.contains(&ns_lower.as_str()) {
                let name = normalize_title(rest);
                if !name.is_empty() {
                    self.out.media.insert(name);
                }
                return String::new();
            }
            if is_language_code(ns.trim()) {
                return String::new();
            }
            if INTERWIKI.contains(&ns_lower.as_str()) {
                return match label {
                    Some(label) => self.render(label, false),
                    None => rest.trim().to_string(),
                };
            }
        }

        match label {
            Some(label) => self.render(label, false),
            None => target.trim_start_matches('#').to_string(),
        }
    }

    /// Handle a tag starting at `rest[0] == '<'`. Returns the number of bytes
    /// consumed, or `None` when the text is not a tag.
    fn tag(&mut self, rest: &str, out: &mut String) -> Option<usize> {
        let open_end = rest.find('>')?;
        let head = &rest[1..open_end];
        let closing = head.starts_with('/');
        let head = head.trim_start_matches('/');
        let self_closing = head.ends_with('/');
        let name: String = head
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric() || *c == '-' || *c == '_')
            .collect::<String>()
            .to_ascii_lowercase();
        if name.is_empty() || head[name.len()..].starts_with(|c: char| !c.is_whitespace() && c != '/') {
            return None;
        }
        let after_open = open_end + 1;
        if closing || name == "br" || self_closing {
            if name == "br" {
                out.push('\n');
            } else if self_closing && !closing && !is_known_tag(&name) && name != "ref" && name != "references" {
                self.out.tags.insert(name);
            }
            return Some(after_open);
        }
        if FORMATTING_TAGS.contains(&name.as_str()) {
            return Some(after_open);
        }

        let close = find_closing_tag(&rest[after_open..], &name);
        let Some((content_len, close_len)) = close else {
            self.out.malformed += 1;
            return Some(after_open);
        };
        let content = &rest[after_open..after_open + content_len];
        let consumed = after_open + content_len + close_len;

        match name.as_str() {
            "ref" => self.collect_urls(content),
            "references" => {}
            n if LITERAL_TAGS.contains(&n) => out.push_str(content),
            n if OPAQUE_TAGS.contains(&n) => {}
            _ => {
                let inner = collapse_whitespace(content);
                self.out.tags.insert(if inner.is_empty() { name } else { inner });
            }
        }
        Some(consumed)
    }

    fn collect_urls(&mut self, text: &str) {
        for url in extract_urls(text) {
            if self.seen_urls.insert(url.clone()) {
                let domain = registrable_domain(&url).unwrap_or_default();
                self.out.references.push(Reference { url, domain });
            }
        }
    }
}

fn is_known_tag(name: &str) -> bool {
    FORMATTING_TAGS.contains(&name) || OPAQUE_TAGS.contains(&name) || LITERAL_TAGS.contains(&name)
}

fn at_line_start(text: &str, i: usize) -> bool {
    text[..i].chars().rev().take_while(|c| *c != '\n').all(|c| c == ' ' || c == '\t')
}

fn is_url_start(s: &str) -> bool {
    s.starts_with("http://") || s.starts_with("https://") || s.starts_with("//")
}

fn is_language_code(ns: &str) -> bool {
    let mut pieces = ns.split('-');
    let head = pieces.next().unwrap_or_default();
    (2..=3).contains(&head.len())
        && head.bytes().all(|b| b.is_ascii_lowercase())
        && pieces.all(|p| !p.is_empty() && p.bytes().all(|b| b.is_ascii_lowercase()))
}

fn magic_word_len(rest: &str) -> Option<usize> {
    let body = rest.strip_prefix("__")?;
    let word_len = body.chars().take_while(|c| c.is_uppercase()).map(char::len_utf8).sum::<usize>();
    if word_len > 0 && body[word_len..].starts_with("__") {
        Some(word_len + 4)
    } else {
        None
    }
}

/// Byte offset of the `close` token matching the `open` token at the start of `s`.
fn matching_close(s: &str, open: &str, close: &str) -> Option<usize> {
    let mut depth = 0usize;
    let mut i = 0;
    while i < s.len() {
        let rest = &s[i..];
        if rest.starts_with(open) {
            depth += 1;
            i += open.len();
        } else if rest.starts_with(close) {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
            i += close.len();
        } else {
            i += rest.chars().next().map_or(1, char::len_utf8);
        }
    }
    None
}

/// Split on `sep` outside nested `{{ }}` and `[[ ]]`.
fn split_top_level(s: &str, sep: char) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut braces = 0usize;
    let mut brackets = 0usize;
    let mut start = 0;
    let mut i = 0;
    while i < s.len() {
        let rest = &s[i..];
        if rest.starts_with("{{") {
            braces += 1;
            i += 2;
        } else if rest.starts_with("}}") {
            braces = braces.saturating_sub(1);
            i += 2;
        } else if rest.starts_with("[[") {
            brackets += 1;
            i += 2;
        } else if rest.starts_with("]]") {
            brackets = brackets.saturating_sub(1);
            i += 2;
        } else {
            let ch = rest.chars().next().unwrap_or_default();
            if ch == sep && braces == 0 && brackets == 0 {
                parts.push(&s[start..i]);
                start = i + ch.len_utf8();
            }
            i += ch.len_utf8();
        }
    }
    parts.push(&s[start..]);
    parts
}

/// Length of the content before `</name>` and the length of that closing tag.
fn find_closing_tag(s: &str, name: &str) -> Option<(usize, usize)> {
    let lower = s.to_ascii_lowercase();
    let needle = alloc::format!("</{name}");
    let mut from = 0;
    while let Some(pos) = lower[from..].find(&needle) {
        let at = from + pos;
        let after = &lower[at + needle.len()..];
        let gap = after.chars().take_while(|c| c.is_whitespace()).count();
        if after[gap..].starts_with('>') {
            return Some((at, needle.len() + gap + 1));
        }
        from = at + needle.len();
    }
    None
}

fn strip_namespace(name: &str, namespaces: &[&str]) -> String {
    if let Some((ns, rest)) = name.split_once(':') {
        if namespaces.contains(&ns.trim().to_lowercase().as_str()) {
            return normalize_title(rest);
        }
    }
    name.to_string()
}

/// MediaWiki title normalisation: underscores are spaces, whitespace is
/// collapsed, and the first letter is case-insensitive (stored uppercase).
pub fn normalize_title(raw: &str) -> String {
    let spaced: String = raw.chars().map(|c| if c == '_' { ' ' } else { c }).collect();
    let collapsed = collapse_whitespace(&spaced);
    let mut chars = collapsed.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// `http(s)://` URLs found anywhere in `text`, in order of appearance.
pub fn extract_urls(text: &str) -> Vec<String> {
    let mut urls = Vec::new();
    let mut rest = text;
    while let Some(pos) = find_url_start(rest) {
        let candidate = &rest[pos..];
        let end = candidate.find(|c: char| c.is_whitespace() || "|[]<>{}\"".contains(c)).unwrap_or(candidate.len());
        let url = candidate[..end].trim_end_matches(|c: char| ".,;:!?)'".contains(c));
        if url.len() > "https://".len() {
            urls.push(url.to_string());
        }
        rest = &candidate[end.max(1)..];
    }
    urls
}

fn find_url_start(s: &str) -> Option<usize> {
    let http = s.find("http://");
    let https = s.find("https://");
    match (http, https) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// Public-suffix-aware registrable domain of a URL's host.
pub fn registrable_domain(url: &str) -> Option<String> {
    let after_scheme = url.split_once("://").map_or(url, |(_, rest)| rest);
    let authority = after_scheme.split(['/', '?', '#']).next().unwrap_or_default();
    let host_port = authority.rsplit_once('@').map_or(authority, |(_, host)| host);
    let host = if host_port.starts_with('[') {
        host_port.split(']').next().map(|h| h.trim_start_matches('['))?
    } else {
        host_port.split(':').next().unwrap_or_default()
    };
    let host = host.trim_end_matches('.').to_lowercase();
    if host.is_empty() {
        return None;
    }
    if host.parse::<core::net::IpAddr>().is_ok() {
        return Some(host);
    }
    Some(psl::domain_str(&host).map_or(host.clone(), ToString::to_string))
}

/// Turn one rendered line into block text, dropping headings' `=` fences,
/// list markers and non-prose lines.
fn block_text(line: &str) -> Option<String> {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with("----") {
        return None;
    }
    let lower = trimmed.to_lowercase();
    if lower.starts_with("#redirect") || lower.starts_with("#перенаправление") {
        return None;
    }
    let text = if trimmed.starts_with('=') && trimmed.ends_with('=') && trimmed.len() > 1 {
        trimmed.trim_matches('=')
    } else {
        trimmed.trim_start_matches(['*', '#', ':', ';'])
    };
    let text = collapse_whitespace(text);
    (!text.is_empty()).then_some(text)
}

/// Abbreviations (lowercase, final dot removed) that do not end a sentence.
const ABBREVIATIONS: &[&str] = &[
    // Cyrillic
    "ул",
    "г",
    "гг",
    "д",
    "им",
    "т",
    "е",
    "п",
    "см",
    "ср",
    "др",
    "пр",
    "пос",
    "обл",
    "просп",
    "пер",
    "пл",
    "стр",
    "тыс",
    "млн",
    "млрд",
    "руб",
    "коп",
    "св",
    "ст",
    "кв",
    "акад",
    "проф",
    "доц",
    "род",
    "ум",
    "англ",
    "нем",
    "фр",
    "лат",
    "греч",
    "укр",
    "рус",
    "итал",
    "исп",
    "букв",
    "напр",
    "т.е",
    "т.д",
    "т.п",
    "т.к",
    "т.н",
    "н.э",
    "вв",
    "км",
    "кг",
    "гл",
    "изд",
    "ред",
    "сост",
    "прим",
    "рис",
    "табл",
    "ок",
    "мин",
    "р-н",
    "пгт",
    "дер",
    "наб",
    "корп",
    "экз",
    // Latin
    "mr",
    "mrs",
    "ms",
    "dr",
    "prof",
    "st",
    "jr",
    "sr",
    "vs",
    "etc",
    "e.g",
    "i.e",
    "no",
    "vol",
    "pp",
    "cf",
    "inc",
    "ltd",
    "co",
    "jan",
    "feb",
    "mar",
    "apr",
    "jun",
    "jul",
    "aug",
    "sep",
    "sept",
    "oct",
    "nov",
    "dec",
    "fig",
    "approx",
    "gen",
    "col",
    "lt",
    "sgt",
    "capt",
    "rev",
    "gov",
    "sen",
    "rep",
    "mt",
    "ft",
    "est",
    "al",
];

const TERMINATORS: &[char] = &['.', '!', '?', '…'];
const CLOSERS: &[char] = &['"', '\'', '»', '”', '’', ')', ']'];
const OPENERS: &[char] = &['"', '«', '„', '“', '(', '\''];

/// Split prose into sentences at `. ! ? …` followed by whitespace and an
/// uppercase letter or digit, except after a listed abbreviation or initial.
pub fn segment_sentences(prose: &str) -> Vec<String> {
    let text = normalize_sentence(prose);
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut k = 0;
    while k < chars.len() {
        let (_, ch) = chars[k];
        if !TERMINATORS.contains(&ch) {
            k += 1;
            continue;
        }
        let mut end = k + 1;
        while end < chars.len() && (TERMINATORS.contains(&chars[end].1) || CLOSERS.contains(&chars[end].1)) {
            end += 1;
        }
        let boundary = end < chars.len()
            && chars[end].1 == ' '
            && starts_sentence(&chars[end + 1..])
            && !(ch == '.' && is_abbreviation(&text[chars[start].0..chars[k].0]));
        if boundary {
            let (from, to) = (chars[start].0, chars[end].0);
            push_sentence(&mut sentences, &text[from..to]);
            start = end + 1;
            k = end + 1;
        } else {
            k = end;
        }
    }
    if start < chars.len() {
        push_sentence(&mut sentences, &text[chars[start].0..]);
    }
    sentences
}

fn push_sentence(out: &mut Vec<String>, s: &str) {
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

fn starts_sentence(rest: &[(usize, char)]) -> bool {
    let mut it = rest.iter().map(|(_, c)| *c).skip_while(|c| OPENERS.contains(c));
    it.next().is_some_and(|c| c.is_uppercase() || c.is_numeric())
}

/// Whether the word ending right before a '.' is an abbreviation or initial.
fn is_abbreviation(before_dot: &str) -> bool {
    let word: String = before_dot
        .chars()
        .rev()
        .take_while(|c| c.is_alphabetic() || *c == '.' || *c == '-')
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    let word = word.trim_start_matches(['.', '-']);
    if word.is_empty() {
        return false;
    }
    if word.split('.').all(|piece| piece.chars().count() == 1) {
        return true;
    }
    ABBREVIATIONS.contains(&word.to_lowercase().as_str())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn category_is_not_prose() {
        let el = parse_wikitext("Текст. [[Категория:X]]");
        assert_eq!(el.sentences, vec!["Текст."]);
        assert_eq!(el.categories, set(&["X"]));
    }

    #[test]
    fn cite_web_becomes_reference() {
        let el = parse_wikitext("{{cite web|url=https://gov.example/a}}");
        assert_eq!(
            el.references,
            vec![Reference { url: "https://gov.example/a".into(), domain: "gov.example".into() }]
        );
        assert!(el.templates.is_empty());
        assert!(el.sentences.is_empty());
    }

    #[test]
    fn ref_urls_and_registrable_domains() {
        let el = parse_wikitext(
            "Fact.<ref>[https://www.kmu.gov.ua/news/1 Cabinet]</ref> Other.<ref name=\"a\" /> \
             More<ref>See https://news.bbc.co.uk/x.</ref>",
        );
        assert_eq!(el.sentences, vec!["Fact.", "Other.", "More"]);
        let domains: Vec<_> = el.references.iter().map(|r| r.domain.as_str()).collect();
        assert_eq!(domains, vec!["kmu.gov.ua", "bbc.co.uk"]);
        assert_eq!(el.references[1].url, "https://news.bbc.co.uk/x");
    }

    #[test]
    fn links_media_and_formatting() {
        let el = parse_wikitext(
            "'''Кот''' живёт в [[Москва|Москве]] и [[Киев]]е.\n[[Файл:Cat.jpg|thumb|Кот [[дома]]]]\n[[en:Cat]]",
        );
        assert_eq!(el.sentences, vec!["Кот живёт в Москве и Киеве."]);
        assert_eq!(el.media, set(&["Cat.jpg"]));
    }

    #[test]
    fn templates_with_normalized_parameters() {
        let el = parse_wikitext("{{Infobox  city | pop = 5 |name=A|x}}\n{{шаблон:стаб}}");
        assert_eq!(el.templates, set(&["Infobox city|x|name=A|pop=5", "Стаб"]));
    }

    #[test]
    fn nested_templates_are_recorded() {
        let el = parse_wikitext("{{Outer|flag={{Flag|UA}}}}");
        assert!(el.templates.contains("Flag|UA"));
        assert!(el.templates.contains("Outer|flag={{Flag|UA}}"));
    }

    #[test]
    fn extension_tags_become_tags() {
        let el = parse_wikitext("Текст.\n<tags>Legislation of the Russian Federation|Medicines</tags>");
        assert_eq!(el.tags, set(&["Legislation of the Russian Federation|Medicines"]));
        assert_eq!(el.sentences, vec!["Текст."]);
    }

    #[test]
    fn headings_and_lists_are_blocks() {
        let el = parse_wikitext("== История ==\n* Первый пункт\n# Второй пункт\n----\n");
        assert_eq!(el.sentences, vec!["История", "Первый пункт", "Второй пункт"]);
    }

    #[test]
    fn tables_and_comments_are_dropped() {
        let el = parse_wikitext("До.\n{|\n| ячейка\n|}\nПосле.<!-- скрыто -->");
        assert_eq!(el.sentences, vec!["До.", "После."]);
    }

    #[test]
    fn unbalanced_markup_is_counted_not_fatal() {
        let el = parse_wikitext("Начало {{незакрытый [[ссылка <ref>x");
        assert!(el.malformed >= 2);
        assert!(!el.sentences.is_empty());
        assert_eq!(parse_wikitext("<!-- open").malformed, 1);
    }

    #[test]
    fn br_splits_lines() {
        let el = parse_wikitext("first part<br />second part");
        assert_eq!(el.sentences, vec!["first part", "second part"]);
    }

    #[test]
    fn segmentation_basics() {
        assert_eq!(segment_sentences("Первое. Второе."), vec!["Первое.", "Второе."]);
        assert_eq!(segment_sentences("ул. Ленина дом 5."), vec!["ул. Ленина дом 5."]);
        assert!(segment_sentences("").is_empty());
        assert!(segment_sentences("   \n ").is_empty());
    }

    #[test]
    fn registrable_domain_edge_cases() {
        assert_eq!(registrable_domain("https://a.gov/x").as_deref(), Some("a.gov"));
        assert_eq!(registrable_domain("http://user@WWW.Example.COM:8080/p").as_deref(), Some("example.com"));
        assert_eq!(registrable_domain("http://127.0.0.1/x").as_deref(), Some("127.0.0.1"));
        assert_eq!(registrable_domain("https:///nohost"), None);
    }
}
