//! Seeded synthetic terminology and label corpus for benchmarks and
//! determinism checks. Labels are roughly 5 KB each and follow the same XML
//! subset as real input.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::terms_io::{CONCEPTS_FILE, MTHSPL_FILE, NDC_MAP_FILE, SEMTYPES_FILE, STOPWORDS_FILE, SYNONYMS_FILE};

#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub seed: u64,
    pub preferred_terms: usize,
    pub substances: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 20_250_101,
            preferred_terms: 1500,
            substances: 400,
        }
    }
}

#[derive(Debug, Clone)]
struct SynthConcept {
    code: String,
    name: String,
    parent: Option<usize>,
    synonyms: Vec<String>,
    semtype: &'static str,
}

#[derive(Debug, Clone)]
pub struct SynthTerminology {
    concepts: Vec<SynthConcept>,
    substances: Vec<(String, String)>,
}

const PREFIXES: &[&str] = &[
    "hyper", "hypo", "neuro", "cardio", "gastro", "hepato", "nephro", "dermo", "myo", "osteo", "pneumo",
    "encephalo", "angio", "arthro", "cysto", "haemo", "lympho", "thrombo", "leuko", "erythro",
];
const ROOTS: &[&str] = &[
    "kal", "natr", "glyc", "therm", "ton", "cardi", "pancreat", "thyro", "col", "derm", "rhin", "pharyng",
    "gingiv", "sinus", "bronch", "mening", "fibr", "necr", "scler", "plas",
];
const SUFFIXES: &[&str] = &["itis", "algia", "emia", "osis", "pathy", "ectasia", "oma", "plegia", "rrhea", "uria"];
const QUALIFIERS: &[&str] = &["acute", "chronic", "severe", "transient", "recurrent", "drug-induced"];
const FILLER: &[&str] = &[
    "patients", "treated", "with", "in", "clinical", "trials", "the", "were", "observed", "placebo",
    "incidence", "of", "than", "greater", "reported", "during", "therapy", "dose", "study", "group",
    "compared", "occurred", "at", "a", "rate", "similar", "across", "arms", "was", "and", "or", "weeks",
    "following", "administration", "monitor", "for", "signs", "discontinue", "if", "develops",
];

fn word(rng: &mut ChaCha8Rng) -> String {
    format!(
        "{}{}{}",
        PREFIXES.choose(rng).unwrap(),
        ROOTS.choose(rng).unwrap(),
        SUFFIXES.choose(rng).unwrap()
    )
}

impl SynthTerminology {
    pub fn generate(cfg: SynthConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut used = BTreeSet::new();
        let mut fresh = |rng: &mut ChaCha8Rng, multi: bool| loop {
            let base = word(rng);
            let name = if multi {
                format!("{} {}", QUALIFIERS.choose(rng).unwrap(), base)
            } else {
                base
            };
            if used.insert(name.clone()) {
                return name;
            }
        };
        let mut concepts = Vec::new();
        for i in 0..cfg.preferred_terms {
            let multi = rng.gen_bool(0.25);
            let name = fresh(&mut rng, multi);
            let semtype = if rng.gen_bool(0.03) {
                "T081"
            } else {
                *["T184", "T047", "T033", "T046", "T191", "T048"].choose(&mut rng).unwrap()
            };
            let mut synonyms = Vec::new();
            if rng.gen_bool(0.3) {
                synonyms.push(fresh(&mut rng, false));
            }
            concepts.push(SynthConcept {
                code: format!("1{:07}", i),
                name,
                parent: None,
                synonyms,
                semtype,
            });
        }
        let pt_count = concepts.len();
        for p in 0..pt_count {
            for _ in 0..rng.gen_range(0..3) {
                let multi = rng.gen_bool(0.3);
                let name = fresh(&mut rng, multi);
                let code = format!("2{:07}", concepts.len());
                concepts.push(SynthConcept {
                    code,
                    name,
                    parent: Some(p),
                    synonyms: Vec::new(),
                    semtype: "",
                });
            }
        }
        concepts.push(SynthConcept {
            code: "19999999".into(),
            name: "adverse reaction".into(),
            parent: None,
            synonyms: vec!["adverse reactions".into()],
            semtype: "T033",
        });
        let substances = (0..cfg.substances)
            .map(|i| (format!("SUB{i:05}"), format!("{}mab", ROOTS[i % ROOTS.len()])))
            .collect();
        SynthTerminology { concepts, substances }
    }

    pub fn write_dir(&self, dir: &Path, labels: usize) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut concepts = String::new();
        let mut synonyms = String::new();
        let mut semtypes = String::new();
        for c in &self.concepts {
            match c.parent {
                None => writeln!(concepts, "{}|MedDRA|PT|{}|", c.code, c.name),
                Some(p) => writeln!(concepts, "{}|MedDRA|LLT|{}|{}", c.code, c.name, self.concepts[p].code),
            }
            .unwrap();
            for s in &c.synonyms {
                writeln!(synonyms, "{}|{}", c.code, s).unwrap();
            }
            if !c.semtype.is_empty() {
                writeln!(semtypes, "{}|{}", c.code, c.semtype).unwrap();
            }
        }
        let mut mthspl = String::new();
        let mut ndc = String::new();
        for (i, (_, name)) in self.substances.iter().enumerate() {
            writeln!(concepts, "RX{i:05}|RxNorm|NA|{name}|").unwrap();
            writeln!(concepts, "SN{i:05}|SNOMED|NA|{name} (substance)|").unwrap();
        }
        for l in 0..labels {
            let (sub_id, sub_name) = &self.substances[l % self.substances.len()];
            writeln!(mthspl, "{}|{}|{}", set_id(l), sub_id, sub_name).unwrap();
            if l % 17 == 16 {
                let (sid, sname) = &self.substances[(l + 1) % self.substances.len()];
                writeln!(mthspl, "{}|{}|{}", set_id(l), sid, sname).unwrap();
            }
            let s = l % self.substances.len();
            writeln!(ndc, "{}|RX{s:05}|SN{s:05}", label_ndc(l)).unwrap();
        }
        fs::write(dir.join(CONCEPTS_FILE), concepts)?;
        fs::write(dir.join(SYNONYMS_FILE), synonyms)?;
        fs::write(dir.join(SEMTYPES_FILE), semtypes)?;
        fs::write(dir.join(MTHSPL_FILE), mthspl)?;
        fs::write(dir.join(NDC_MAP_FILE), ndc)?;
        fs::write(
            dir.join(STOPWORDS_FILE),
            "# generic phrases\nadverse reaction\nadverse reactions\nthe\nand\n",
        )?;
        Ok(())
    }

    fn surface(&self, rng: &mut ChaCha8Rng) -> String {
        let c = self.concepts.choose(rng).unwrap();
        let s = if !c.synonyms.is_empty() && rng.gen_bool(0.5) {
            c.synonyms.choose(rng).unwrap().clone()
        } else {
            c.name.clone()
        };
        if rng.gen_bool(0.1) {
            s.to_uppercase()
        } else {
            s
        }
    }

    fn prose(&self, rng: &mut ChaCha8Rng, target: usize) -> String {
        let mut out = String::with_capacity(target + 64);
        while out.len() < target {
            if !out.is_empty() {
                out.push(' ');
            }
            if rng.gen_bool(0.12) {
                out.push_str(&self.surface(rng));
            } else {
                out.push_str(FILLER.choose(rng).unwrap());
            }
        }
        out
    }

    /// One label of about 5 KB.
    pub fn label(&self, index: usize, seed: u64) -> String {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut x = String::with_capacity(6 * 1024);
        x.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<document xmlns=\"urn:hl7-org:v3\">\n");
        writeln!(x, "  <setId root=\"{}\"/>", set_id(index)).unwrap();
        writeln!(x, "  <versionNumber value=\"{}\"/>", 1 + index % 4).unwrap();
        writeln!(x, "  <effectiveTime value=\"20{:02}{:02}{:02}\"/>", 10 + index % 14, 1 + index % 12, 1 + index % 28)
            .unwrap();
        writeln!(
            x,
            "  <product><package><code code=\"{}\" codeSystem=\"2.16.840.1.113883.6.69\"/></package></product>",
            label_ndc(index)
        )
        .unwrap();
        x.push_str("  <component><structuredBody>\n");
        if rng.gen_bool(0.5) {
            writeln!(
                x,
                "    <section><code code=\"34066-1\"/><title>WARNING</title><text><paragraph>{}</paragraph></text></section>",
                self.prose(&mut rng, 350)
            )
            .unwrap();
        }
        writeln!(
            x,
            "    <section><code code=\"34067-9\"/><title>INDICATIONS AND USAGE</title><text><paragraph>{}</paragraph></text></section>",
            self.prose(&mut rng, 400)
        )
        .unwrap();
        x.push_str("    <section><code code=\"34084-4\"/><title>ADVERSE REACTIONS</title><text>\n");
        for _ in 0..3 {
            writeln!(x, "      <paragraph>{}</paragraph>", self.prose(&mut rng, 800)).unwrap();
        }
        x.push_str("      <list>");
        for _ in 0..6 {
            write!(x, "<item>{}</item>", self.surface(&mut rng)).unwrap();
        }
        x.push_str("</list>\n      <table><tbody>");
        for _ in 0..8 {
            write!(
                x,
                "<tr><td><content styleCode=\"bold\">{}</content></td><td>{}%</td></tr>",
                self.surface(&mut rng),
                rng.gen_range(1..40)
            )
            .unwrap();
        }
        x.push_str("</tbody></table>\n    </text></section>\n");
        x.push_str("  </structuredBody></component>\n</document>\n");
        x
    }
}

pub fn set_id(index: usize) -> String {
    format!("synth-{index:06}")
}

fn label_ndc(index: usize) -> String {
    format!("{:05}-{:04}-{:02}", 10_000 + index / 10_000, index % 10_000, 1)
}

#[derive(Debug, Clone)]
pub struct CorpusPaths {
    pub terms_dir: PathBuf,
    pub labels_dir: PathBuf,
}

/// Writes a terminology directory and `count` labels below `root`.
pub fn write_corpus(root: &Path, count: usize, cfg: SynthConfig) -> io::Result<CorpusPaths> {
    let terms = SynthTerminology::generate(cfg);
    let terms_dir = root.join("terms");
    let labels_dir = root.join("labels");
    terms.write_dir(&terms_dir, count)?;
    fs::create_dir_all(&labels_dir)?;
    for i in 0..count {
        fs::write(labels_dir.join(format!("{}.xml", set_id(i))), terms.label(i, cfg.seed))?;
    }
    Ok(CorpusPaths { terms_dir, labels_dir })
}
