//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;

use tm_core::behavior::{simulate, Scenario, Termination};
use tm_core::dsl::{parse, serialize_document};
use tm_core::fixtures::{COFFEE_MUG, E_PURCHASE, ISSUER_BANK, ISSUER_BANK_POLICY};
use tm_core::io::{from_structured, to_structured};
use tm_core::leakage::{analyze, parse_policy};
use tm_core::legality::legal_kinds;
use tm_core::StageKind::{self, *};

type Outcome = Result<String, String>;

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("coffee mug cycle", coffee_mug),
        ("e-purchase scenarios", e_purchase),
        ("issuer bank leakage", issuer_bank),
        ("oracle equivalence", oracle_equivalence),
        ("round trips", round_trips),
        ("legality table", legality_table),
        ("fuzz robustness", fuzz),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} ({ms} ms)"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} ({ms} ms)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn within(limit: Duration, start: Instant, what: &str) -> Result<(), String> {
    let took = start.elapsed();
    if took < limit {
        Ok(())
    } else {
        Err(format!("{what} took {took:?}, limit {limit:?}"))
    }
}

fn coffee_mug() -> Outcome {
    let start = Instant::now();
    let r = parse(COFFEE_MUG);
    let (m, b) = (r.model.ok_or("fixture does not parse")?, r.behavior.unwrap());
    let t = simulate(&m, &b.events, &b.chronology, &Scenario::new("cycle", "Ea", 8)).map_err(|e| e.to_string())?;
    within(Duration::from_secs(1), start, "simulation")?;
    let want = ["Ea", "Eb", "Ec", "Ed", "Ea", "Eb", "Ec", "Ed"];
    if t.event_ids() != want || t.terminated != Termination::MaxSteps {
        return Err(format!("got {:?} ending {}", t.event_ids(), t.terminated));
    }
    Ok("Ea..Ed twice, then MaxSteps".into())
}

/// Hand-traced from the event list before the simulator existed.
const PURCHASE_TRACES: [(&str, &[&str], Termination); 4] = [
    (
        "success",
        &[
            "E1", "E2", "E3", "E4", "E5", "E6", "E8", "E9", "E10", "E11", "E12", "E13", "E17", "E18", "E20", "E21",
            "E22",
        ],
        Termination::NoSuccessor,
    ),
    (
        "invalid_input",
        &["E1", "E2", "E3", "E4", "E5", "E6", "E7", "E5", "E6", "E7", "E5", "E6"],
        Termination::MaxSteps,
    ),
    (
        "fraud_rejected",
        &[
            "E1", "E2", "E3", "E4", "E5", "E6", "E8", "E9", "E10", "E11", "E12", "E13", "E14", "E15", "E16",
        ],
        Termination::NoSuccessor,
    ),
    (
        "insufficient_balance",
        &[
            "E1", "E2", "E3", "E4", "E5", "E6", "E8", "E9", "E10", "E11", "E12", "E13", "E17", "E18", "E19", "E15",
            "E16",
        ],
        Termination::NoSuccessor,
    ),
];

fn e_purchase() -> Outcome {
    let r = parse(E_PURCHASE);
    let (m, b) = (r.model.ok_or("fixture does not parse")?, r.behavior.unwrap());
    for (name, want, end) in PURCHASE_TRACES {
        let s = b.scenario(name).ok_or(format!("no scenario {name}"))?;
        let start = Instant::now();
        let t = simulate(&m, &b.events, &b.chronology, s).map_err(|e| e.to_string())?;
        within(Duration::from_secs(1), start, name)?;
        if t.event_ids() != want || t.terminated != end {
            return Err(format!("{name}: got {:?} ending {}", t.event_ids(), t.terminated));
        }
    }
    Ok("4 scenarios match their hand traces".into())
}

/// The seven expected leakage machines, with who activates each.
const BANK_LEAKS: [(&str, &str); 7] = [
    ("IssuerBank/ServerRoom/ConsoleCapture", "employee who has access to the server room"),
    ("IssuerBank/ITOffice/PcCapture", "IT employee"),
    ("IssuerBank/ITOffice/PrintCopy", "IT employee"),
    ("IssuerBank/Office/PcCapture", "non-IT employee"),
    ("IssuerBank/Records/Copy", "record-keeping employee"),
    ("IssuerBank/Messenger", "messenger"),
    ("IssuerBank/Office/HardCopy", "employee"),
];

fn issuer_bank() -> Outcome {
    let start = Instant::now();
    let m = parse(ISSUER_BANK).model.ok_or("fixture does not parse")?;
    let p = parse_policy(ISSUER_BANK_POLICY, &m).policy.ok_or("policy does not parse")?;
    let found = analyze(&m, &p).map_err(|e| format!("{e:?}"))?;
    within(Duration::from_secs(1), start, "analysis")?;
    let got: BTreeSet<(String, Option<String>)> = found
        .iter()
        .map(|f| (f.leak_machine_path.clone(), f.activator.clone()))
        .collect();
    let want: BTreeSet<(String, Option<String>)> = BANK_LEAKS
        .iter()
        .map(|(p, a)| (p.to_string(), Some(a.to_string())))
        .collect();
    if found.len() != 7 || got != want {
        return Err(format!("got {got:?}"));
    }
    if found != analyze(&m, &p).unwrap() {
        return Err("second run differs".into());
    }
    if found != common::oracle_findings(&m, &p) {
        return Err("disagrees with the oracle".into());
    }
    Ok("7 findings, activators and locations as enumerated".into())
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut compared = 0;
    let mut findings = 0;
    for seed in 0..1000u64 {
        let mut rng = common::rng(seed);
        let m = common::random_model(&mut rng);
        let p = common::random_policy(&mut rng, &m);
        let got = analyze(&m, &p).map_err(|e| format!("seed {seed}: {e:?}"))?;
        if got != common::oracle_findings(&m, &p) {
            return Err(format!("seed {seed}: mismatch"));
        }
        compared += 1;
        findings += got.len();
    }
    within(Duration::from_secs(60), start, "1000 models")?;
    Ok(format!("{compared} models, {findings} findings, 0 mismatches"))
}

fn round_trips() -> Outcome {
    let mut docs = Vec::new();
    for text in [COFFEE_MUG, E_PURCHASE, ISSUER_BANK] {
        let r = parse(text);
        docs.push((r.model.ok_or("fixture does not parse")?, r.behavior.unwrap()));
    }
    for seed in 0..1000u64 {
        let mut rng = common::rng(seed);
        let m = common::random_model(&mut rng);
        let b = common::random_behavior(&mut rng, &m);
        docs.push((m, b));
    }
    for (i, (m, b)) in docs.iter().enumerate() {
        let text = serialize_document(m, Some(b)).map_err(|e| format!("doc {i}: {e}"))?;
        let back = parse(&text);
        if back.model.as_ref() != Some(m) || back.behavior.as_ref() != Some(b) {
            return Err(format!("doc {i}: text round trip differs"));
        }
        let json = to_structured(m, Some(b)).map_err(|e| format!("doc {i}: {e}"))?;
        let doc = from_structured(&json).map_err(|d| format!("doc {i}: {d:?}"))?;
        if &doc.model != m || doc.behavior.as_ref() != Some(b) {
            return Err(format!("doc {i}: structured round trip differs"));
        }
    }
    Ok(format!("{} documents, both formats", docs.len()))
}

fn legality_table() -> Outcome {
    // Documented table, written out independently of the implementation.
    let intra = [
        (Transfer, Receive),
        (Receive, Process),
        (Receive, Release),
        (Process, Release),
        (Create, Process),
        (Create, Release),
        (Release, Transfer),
    ];
    let inter = [(Transfer, Transfer)];
    let mut checked = 0;
    let mut legal = 0;
    for a in StageKind::ALL {
        for b in StageKind::ALL {
            for same in [true, false] {
                let want = if same { intra.contains(&(a, b)) } else { inter.contains(&(a, b)) };
                if legal_kinds(a, b, same) != want {
                    return Err(format!("{a} -> {b} (same machine: {same})"));
                }
                checked += 1;
                legal += usize::from(want);
            }
        }
    }
    if checked != 50 || legal != 8 {
        return Err(format!("{checked} combinations, {legal} legal"));
    }
    Ok("50 combinations, 8 legal".into())
}

fn fuzz() -> Outcome {
    let mut rng = common::rng(0xF022);
    let alphabet = b"machine thing flow trigger event chron scenario stage create process receive release transfer \
                     [](){}<>:;,.=-/!\"#\n\t 0123456789 leak sensitive step actor external guard";
    let corpus = [COFFEE_MUG, E_PURCHASE, ISSUER_BANK];
    let mut slowest = Duration::ZERO;
    for i in 0..10_000 {
        let bytes: Vec<u8> = match i % 3 {
            0 => (0..rng.gen_range(0..400)).map(|_| rng.gen()).collect(),
            1 => (0..rng.gen_range(0..400))
                .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
                .collect(),
            _ => {
                let mut b = corpus[i % corpus.len()].as_bytes().to_vec();
                for _ in 0..rng.gen_range(1..8) {
                    let at = rng.gen_range(0..b.len());
                    match rng.gen_range(0..3) {
                        0 => b[at] = rng.gen(),
                        1 => {
                            b.remove(at);
                        }
                        _ => b.insert(at, alphabet[rng.gen_range(0..alphabet.len())]),
                    }
                }
                b
            }
        };
        let text = String::from_utf8_lossy(&bytes);
        let start = Instant::now();
        let r = std::panic::catch_unwind(|| parse(&text)).map_err(|_| format!("input {i} panicked"))?;
        let took = start.elapsed();
        slowest = slowest.max(took);
        if took > Duration::from_secs(5) {
            return Err(format!("input {i} took {took:?}"));
        }
        if r.model.is_none() && r.diagnostics.is_empty() {
            return Err(format!("input {i}: rejected without diagnostics"));
        }
        let lines: Vec<&str> = text.split('\n').collect();
        for d in &r.diagnostics {
            if let Some(s) = d.span() {
                let line = s.line as usize;
                let ok = line >= 1
                    && line <= lines.len()
                    && s.column >= 1
                    && (s.column as usize) <= lines[line - 1].chars().count() + 1;
                if !ok {
                    return Err(format!("input {i}: span {s:?} out of bounds"));
                }
            }
        }
    }
    Ok(format!("10000 inputs, slowest {slowest:?}"))
}
