//! Randomized invariants over the scoring rules, the agreement statistic,
//! and rule-pack serialization. These complement the hand-built cases in the
//! unit tests by exploring inputs nobody thought to write down.

use std::str::FromStr;

use autonomy_audit::agreement::{fleiss_kappa, AgreementMatrix, CATEGORY_COUNT};
use autonomy_audit::rules::pack::{NamePattern, UnknownWhen};
use autonomy_audit::scan::{Location, Provenance};
use autonomy_audit::{autogen_pack, inject_defaults, score_attribute, Attribute, FlagKind, FlagSite, NormalizedValue};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn flag_kind() -> impl Strategy<Value = FlagKind> {
    prop_oneof![
        Just(FlagKind::CodeExecutionConfig),
        Just(FlagKind::UseDocker),
        Just(FlagKind::BrowserConfig),
        Just(FlagKind::MaxRounds),
        Just(FlagKind::MaxConsecutiveAutoReply),
        Just(FlagKind::HumanInputMode),
        Just(FlagKind::SystemMessage),
        Just(FlagKind::LoggingInvocation),
        Just(FlagKind::DisplayConfig),
        Just(FlagKind::AgentConstruction),
        Just(FlagKind::GroupChatConstruction),
        "[a-z_]{1,12}".prop_map(FlagKind::Other),
    ]
}

fn normalized_value() -> impl Strategy<Value = NormalizedValue> {
    let leaf = prop_oneof![
        any::<bool>().prop_map(NormalizedValue::Bool),
        (-5i64..50).prop_map(NormalizedValue::Int),
        prop_oneof![
            Just("ALWAYS".to_string()),
            Just("NEVER".to_string()),
            Just("TERMINATE".to_string()),
            Just("please execute the function".to_string()),
            "[ -~]{0,24}".prop_map(String::from),
        ]
        .prop_map(NormalizedValue::Str),
        Just(NormalizedValue::Absent),
        "[a-z_.]{1,16}".prop_map(NormalizedValue::Unresolved),
    ];
    prop_oneof![
        9 => leaf.clone(),
        1 => prop::collection::btree_map("[a-z_]{1,8}", leaf, 0..3).prop_map(NormalizedValue::Mapping),
    ]
}

fn location() -> impl Strategy<Value = Location> {
    (1u32..200, 1u32..80).prop_map(|(line, column)| Location {
        path: "app.py".to_string(),
        line,
        column,
    })
}

fn flag_site() -> impl Strategy<Value = FlagSite> {
    (
        flag_kind(),
        normalized_value(),
        location(),
        prop::option::of("[a-z_]{1,10}"),
        prop::option::of(prop_oneof![
            Just("UserProxyAgent".to_string()),
            Just("AssistantAgent".to_string()),
            Just("ConversableAgent".to_string()),
            Just("GroupChat".to_string()),
            "[A-Z][a-zA-Z]{1,12}".prop_map(String::from),
        ]),
        any::<bool>(),
        prop::option::of(location()),
    )
        .prop_map(|(kind, value, location, enclosing, constructor, explicit, call_site)| FlagSite {
            kind,
            value,
            location,
            enclosing_construct: enclosing,
            constructor_name: constructor,
            provenance: if explicit { Provenance::Explicit } else { Provenance::FrameworkDefault },
            call_site,
        })
}

proptest! {
    /// Scoring any pile of sites is total and internally consistent: the
    /// evidence list only contains relevant kinds and stays sorted, a mixed
    /// marking implies a concrete level, and an attribute whose unknown rule
    /// is "no relevant evidence" never reports a level without evidence.
    #[test]
    fn scoring_is_total_and_consistent(sites in prop::collection::vec(flag_site(), 0..14)) {
        let pack = autogen_pack();
        let enriched = inject_defaults(&sites, &pack);
        for attribute in Attribute::ALL {
            let score = score_attribute(attribute, &enriched, &pack);
            let rules = &pack.attributes[&attribute];
            for evidence in &score.evidence {
                prop_assert!(rules.relevant.contains(&evidence.kind),
                    "{attribute}: evidence kind {} is not relevant", evidence.kind);
            }
            for pair in score.evidence.windows(2) {
                prop_assert!(pair[0].location <= pair[1].location, "{attribute}: evidence out of order");
            }
            if score.mixed {
                prop_assert!(score.level.is_some(), "{attribute}: mixed without a level");
            }
            if rules.unknown_when == UnknownWhen::RelevantAbsent && score.level.is_some() {
                prop_assert!(!score.evidence.is_empty(), "{attribute}: level without evidence");
            }
            if score.level.is_none() {
                prop_assert!(!score.mixed, "{attribute}: unknown but mixed");
            }
        }
    }

    /// Injecting framework defaults is idempotent: a second pass finds every
    /// implied flag already covered and adds nothing.
    #[test]
    fn default_injection_is_idempotent(sites in prop::collection::vec(flag_site(), 0..14)) {
        let pack = autogen_pack();
        let once = inject_defaults(&sites, &pack);
        let twice = inject_defaults(&once, &pack);
        prop_assert_eq!(once, twice);
    }

    /// The agreement statistic does not depend on item order.
    #[test]
    fn kappa_ignores_item_order(
        raters in 2u64..=5,
        assignments in prop::collection::vec(prop::collection::vec(0usize..CATEGORY_COUNT, 5), 1..12),
        seed in any::<u64>(),
    ) {
        let rows: Vec<[u64; CATEGORY_COUNT]> = assignments
            .iter()
            .map(|picks| {
                let mut row = [0u64; CATEGORY_COUNT];
                for &pick in picks.iter().take(raters as usize) {
                    row[pick] += 1;
                }
                row
            })
            .collect();
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let original = fleiss_kappa(&AgreementMatrix { counts: rows, raters_per_item: raters });
        let reordered = fleiss_kappa(&AgreementMatrix { counts: shuffled, raters_per_item: raters });
        match (original, reordered) {
            (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12, "kappa changed under reordering: {a} vs {b}"),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "reordering changed the outcome class: {a:?} vs {b:?}"),
        }
    }

    /// Name patterns survive a display/parse round trip.
    #[test]
    fn name_pattern_round_trips(
        variant in 0usize..5,
        payload in "[a-zA-Z_][a-zA-Z0-9_]{0,14}",
    ) {
        let pattern = match variant {
            0 => NamePattern::Exact(payload),
            1 => NamePattern::Suffix(payload),
            2 => NamePattern::Prefix(payload),
            3 => NamePattern::Word(payload),
            _ => NamePattern::WordPrefix(payload),
        };
        let text = pattern.to_string();
        let parsed = NamePattern::from_str(&text).unwrap();
        prop_assert_eq!(pattern, parsed);
    }

    /// Scoring ignores sites the rule pack never mentions.
    #[test]
    fn unrecognized_flags_do_not_move_scores(
        sites in prop::collection::vec(flag_site(), 0..10),
        noise_name in "[a-z_]{1,12}",
        noise_value in normalized_value(),
        noise_line in 1u32..200,
    ) {
        let pack = autogen_pack();
        let mut extended = sites.clone();
        extended.push(FlagSite {
            kind: FlagKind::Other(noise_name),
            value: noise_value,
            location: Location { path: "noise.py".to_string(), line: noise_line, column: 1 },
            enclosing_construct: None,
            constructor_name: None,
            provenance: Provenance::Explicit,
            call_site: None,
        });
        let before = inject_defaults(&sites, &pack);
        let after = inject_defaults(&extended, &pack);
        for attribute in Attribute::ALL {
            let a = score_attribute(attribute, &before, &pack);
            let b = score_attribute(attribute, &after, &pack);
            // An unknown flag still proves the repository is not empty, which
            // is exactly what the repo-empty unknown rule keys on.
            if pack.attributes[&attribute].unknown_when == UnknownWhen::RepoEmpty && sites.is_empty() {
                continue;
            }
            prop_assert_eq!(a.level, b.level, "{} moved on unrecognized evidence", attribute);
            prop_assert_eq!(a.mixed, b.mixed);
            prop_assert_eq!(a.evidence, b.evidence);
        }
    }
}
