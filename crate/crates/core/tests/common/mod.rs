//! Generators and reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;
use regex_automata::meta::Regex as MetaRegex;
use regex_automata::{Anchored, Input, PatternID};

use leakwatch::{RuleCatalog, Span};

pub const ALNUM: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
pub const UPPER_DIGIT: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
pub const URLSAFE: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_-";
pub const B64: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
pub const HEX: &[u8] = b"0123456789abcdef";
pub const DIGITS: &[u8] = b"0123456789";

pub fn rand_str<R: Rng>(rng: &mut R, alphabet: &[u8], n: usize) -> String {
    (0..n).map(|_| *alphabet.choose(rng).unwrap() as char).collect()
}

/// A secret plus the surrounding text that makes its rule fire.
#[derive(Debug, Clone)]
pub struct Injection {
    pub rule_id: &'static str,
    pub prefix: String,
    pub secret: String,
    pub suffix: String,
}

/// Real-format value for `rule_id`, wrapped so that exactly the secret is
/// the reported span.
pub fn inject<R: Rng>(rng: &mut R, rule_id: &'static str) -> Injection {
    let (prefix, secret, suffix): (String, String, String) = match rule_id {
        "aws-akid" => ("".into(), format!("AKIA{}", rand_str(rng, UPPER_DIGIT, 16)), "".into()),
        "aws-secret-key" => ("aws_secret_access_key = \"".into(), rand_str(rng, B64, 40), "\"".into()),
        "gcp-api-key" => ("".into(), format!("AIza{}", rand_str(rng, URLSAFE, 35)), "".into()),
        "gcp-service-account-key-id" => ("\"private_key_id\": \"".into(), rand_str(rng, HEX, 40), "\"".into()),
        "azure-storage-key" => (
            "DefaultEndpointsProtocol=https;AccountName=acct;AccountKey=".into(),
            format!("{}==", rand_str(rng, B64, 86)),
            ";".into(),
        ),
        "digitalocean-token" => ("".into(), format!("dop_v1_{}", rand_str(rng, HEX, 64)), "".into()),
        "heroku-api-key" => (
            "HEROKU_API_KEY=".into(),
            format!(
                "{}-{}-{}-{}-{}",
                rand_str(rng, HEX, 8),
                rand_str(rng, HEX, 4),
                rand_str(rng, HEX, 4),
                rand_str(rng, HEX, 4),
                rand_str(rng, HEX, 12)
            ),
            "".into(),
        ),
        "github-pat" => ("".into(), format!("ghp_{}", rand_str(rng, ALNUM, 36)), "".into()),
        "github-oauth" => ("".into(), format!("gho_{}", rand_str(rng, ALNUM, 36)), "".into()),
        "github-app-token" => {
            let p = if rng.random_bool(0.5) { "ghu_" } else { "ghs_" };
            ("".into(), format!("{p}{}", rand_str(rng, ALNUM, 36)), "".into())
        }
        "github-refresh-token" => ("".into(), format!("ghr_{}", rand_str(rng, ALNUM, 36)), "".into()),
        "github-fine-grained-pat" => (
            "".into(),
            format!("github_pat_{}{}", rand_str(rng, URLSAFE.split_at(63).0, 81), rand_str(rng, ALNUM, 1)),
            "".into(),
        ),
        "gitlab-pat" => ("".into(), format!("glpat-{}{}", rand_str(rng, URLSAFE, 19), rand_str(rng, ALNUM, 1)), "".into()),
        "gitlab-runner-token" => (
            "".into(),
            format!("GR1348941{}{}", rand_str(rng, URLSAFE, 19), rand_str(rng, ALNUM, 1)),
            "".into(),
        ),
        "bitbucket-app-password" => ("".into(), format!("ATBB{}", rand_str(rng, ALNUM, 32)), "".into()),
        "slack-token" => {
            let t = *b"baprs".choose(rng).unwrap() as char;
            (
                "".into(),
                format!("xox{t}-{}-{}-{}", rand_str(rng, DIGITS, 11), rand_str(rng, DIGITS, 12), rand_str(rng, ALNUM, 24)),
                "".into(),
            )
        }
        "slack-webhook" => (
            "".into(),
            format!(
                "https://hooks.slack.com/services/T{}/B{}/{}",
                rand_str(rng, UPPER_DIGIT, 9),
                rand_str(rng, UPPER_DIGIT, 9),
                rand_str(rng, ALNUM, 24)
            ),
            "".into(),
        ),
        "discord-bot-token" => (
            "".into(),
            format!(
                "M{}.{}{}.{}{}",
                rand_str(rng, ALNUM, 23),
                rand_str(rng, URLSAFE, 5),
                rand_str(rng, ALNUM, 1),
                rand_str(rng, URLSAFE, 26),
                rand_str(rng, ALNUM, 1)
            ),
            "".into(),
        ),
        "discord-webhook" => (
            "".into(),
            format!(
                "https://discord.com/api/webhooks/{}/{}",
                rand_str(rng, DIGITS, 18),
                rand_str(rng, URLSAFE, 68)
            ),
            "".into(),
        ),
        "telegram-bot-token" => (
            "".into(),
            format!("{}:AA{}{}", rand_str(rng, DIGITS, 9), rand_str(rng, URLSAFE, 32), rand_str(rng, ALNUM, 1)),
            "".into(),
        ),
        "pem-private-key" => {
            let kind = ["", "RSA ", "EC ", "OPENSSH "].choose(rng).unwrap();
            ("".into(), format!("-----BEGIN {kind}PRIVATE KEY-----"), "".into())
        }
        "stripe-secret-key" => {
            let n = rng.random_range(24..40);
            ("".into(), format!("sk_live_{}", rand_str(rng, ALNUM, n)), "".into())
        }
        "openai-api-key" => ("".into(), format!("sk-{}", rand_str(rng, ALNUM, 48)), "".into()),
        "sendgrid-api-key" => (
            "".into(),
            format!("SG.{}.{}{}", rand_str(rng, URLSAFE, 22), rand_str(rng, URLSAFE, 42), rand_str(rng, ALNUM, 1)),
            "".into(),
        ),
        "twilio-api-key" => ("".into(), format!("SK{}", rand_str(rng, HEX, 32)), "".into()),
        "mailgun-api-key" => ("".into(), format!("key-{}", rand_str(rng, ALNUM, 32)), "".into()),
        "npm-token" => ("".into(), format!("npm_{}", rand_str(rng, ALNUM, 36)), "".into()),
        "pypi-token" => ("".into(), format!("pypi-AgEIcHlwaS5vcmc{}", rand_str(rng, URLSAFE, 60)), "".into()),
        "jwt" => (
            "".into(),
            format!(
                "eyJ{}.eyJ{}.{}",
                rand_str(rng, URLSAFE, 20),
                rand_str(rng, URLSAFE, 30),
                rand_str(rng, URLSAFE, 25)
            ),
            "".into(),
        ),
        "url-credentials" => (
            "postgres://admin:".into(),
            rand_str(rng, ALNUM, 14),
            "@db.internal:5432/app".into(),
        ),
        "generic-api-key" => {
            let n = rng.random_range(8..48);
            ("api_key = \"".into(), rand_str(rng, ALNUM, n), "\"".into())
        }
        "generic-secret" => {
            let n = rng.random_range(8..48);
            ("client_secret: '".into(), rand_str(rng, ALNUM, n), "'".into())
        }
        "generic-token" => {
            let n = rng.random_range(8..48);
            ("auth_token = \"".into(), rand_str(rng, ALNUM, n), "\"".into())
        }
        "generic-password" => {
            let n = rng.random_range(6..30);
            ("password: \"".into(), rand_str(rng, ALNUM, n), "\"".into())
        }
        "bearer-token" => {
            let n = rng.random_range(20..60);
            ("Authorization: Bearer ".into(), rand_str(rng, URLSAFE, n), "".into())
        }
        other => panic!("no generator for rule {other}"),
    };
    Injection {
        rule_id,
        prefix,
        secret,
        suffix,
    }
}

/// Rule ids of the seed catalog (as `'static` strings for [`inject`]).
pub fn seed_rule_ids() -> Vec<&'static str> {
    RuleCatalog::seed()
        .rules()
        .iter()
        .map(|r| &*Box::leak(r.id.clone().into_boxed_str()))
        .collect()
}

const WORDS: &[&str] = &[
    "the", "build", "fails", "when", "running", "tests", "on", "CI", "after", "upgrade", "config",
    "error", "timeout", "expected", "actual", "steps", "to", "reproduce", "log", "output", "worker",
    "naïve", "café", "日本語", "données", "🔥", "«ok»", "résumé", "Ω", "v1.2.3", "#1234", "(see", "above)",
];

pub fn filler<R: Rng>(rng: &mut R, words: usize) -> String {
    let mut s = String::new();
    for i in 0..words {
        if i > 0 {
            s.push(if rng.random_bool(0.1) { '\n' } else { ' ' });
        }
        s.push_str(WORDS.choose(rng).unwrap());
    }
    s
}

/// A random document with secrets injected at known spans.
#[derive(Debug, Clone)]
pub struct InjectedDoc {
    pub text: String,
    pub secrets: Vec<(String, Span)>,
}

pub fn injected_document<R: Rng>(rng: &mut R, rule_ids: &[&'static str]) -> InjectedDoc {
    let words = rng.random_range(0..40);
    let mut text = filler(rng, words);
    let mut secrets = Vec::new();
    for _ in 0..rng.random_range(0..6) {
        let id = *rule_ids.choose(rng).unwrap();
        let inj = inject(rng, id);
        text.push(if rng.random_bool(0.5) { '\n' } else { ' ' });
        text.push_str(&inj.prefix);
        let start = text.len();
        text.push_str(&inj.secret);
        secrets.push((inj.rule_id.to_string(), Span::new(start, text.len())));
        text.push_str(&inj.suffix);
        text.push(' ');
        let words = rng.random_range(0..30);
        text.push_str(&filler(rng, words));
    }
    InjectedDoc { text, secrets }
}

const NEAR_MISSES: &[&str] = &[
    "ghp_", "gho_", "AKIA", "AIza", "sk_live_", "sk-", "xoxb-", "glpat-", "eyJ", ".", "=", ":", "\"",
    "'", "token", "api_key", "password", "secret", "Bearer ", "Authorization: ", "https://", "@",
    "-----BEGIN ", "PRIVATE KEY-----", "_", "-", "/", "\n", " ", "é", "☃",
];

/// Adversarial text: near-miss fragments, random runs, and real injections
/// placed without separators so that matches can touch or overlap.
pub fn noisy_document<R: Rng>(rng: &mut R, rule_ids: &[&'static str]) -> String {
    let mut s = String::new();
    for _ in 0..rng.random_range(0..60) {
        match rng.random_range(0..10) {
            0..=3 => s.push_str(NEAR_MISSES.choose(rng).unwrap()),
            4..=6 => {
                let n = rng.random_range(1..50);
                s.push_str(&rand_str(rng, URLSAFE, n));
            }
            7 => s.push_str(&filler(rng, 3)),
            _ => {
                let id = *rule_ids.choose(rng).unwrap();
        let inj = inject(rng, id);
                s.push_str(&inj.prefix);
                s.push_str(&inj.secret);
                s.push_str(&inj.suffix);
            }
        }
    }
    s
}

/// Per-rule brute-force matcher: tries an anchored match at every character
/// boundary, left to right, resuming after each accepted match. Reports the
/// `secret` group when the pattern has one. Shares no code with the library
/// matcher.
pub struct BruteForce {
    rules: Vec<(String, MetaRegex, Option<usize>)>,
}

impl BruteForce {
    pub fn new(catalog: &RuleCatalog) -> Self {
        let rules = catalog
            .rules()
            .iter()
            .filter(|r| r.enabled)
            .map(|r| {
                let re = MetaRegex::new(&r.pattern).unwrap();
                let group = re.group_info().to_index(PatternID::ZERO, "secret");
                (r.id.clone(), re, group)
            })
            .collect();
        BruteForce { rules }
    }

    pub fn matches(&self, text: &str) -> BTreeMap<(String, Span), usize> {
        let mut out = BTreeMap::new();
        for (id, re, group) in &self.rules {
            let mut caps = re.create_captures();
            let mut pos = 0;
            while pos <= text.len() {
                if !text.is_char_boundary(pos) {
                    pos += 1;
                    continue;
                }
                let input = Input::new(text).range(pos..).anchored(Anchored::Yes);
                re.search_captures(&input, &mut caps);
                let Some(m) = caps.get_match() else {
                    pos += 1;
                    continue;
                };
                let span = match group {
                    None => Some(Span::new(m.start(), m.end())),
                    Some(g) => caps
                        .get_group(*g)
                        .filter(|s| s.start < s.end)
                        .map(|s| Span::new(s.start, s.end)),
                };
                if let Some(span) = span {
                    *out.entry((id.clone(), span)).or_insert(0) += 1;
                }
                pos = if m.end() > pos { m.end() } else { pos + 1 };
            }
        }
        out
    }
}

pub fn brute_force_matches(catalog: &RuleCatalog, text: &str) -> BTreeMap<(String, Span), usize> {
    BruteForce::new(catalog).matches(text)
}

pub mod stub;
