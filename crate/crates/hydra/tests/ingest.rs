use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use hydra::core::synth::{generate, to_corpus, SynthConfig};
use hydra::core::SourceKind;
use hydra::ingest::{
    default_extensions, load_csv_corpus, load_input, read_csv_corpus, scan_source_tree, write_csv_corpus, CsvOptions,
    IngestError,
};

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    if let Some(parent) = p.parent() {
        fs::create_dir_all(parent).unwrap();
    }
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn three_rows_get_row_index_ids() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "d.csv",
        "func_after,other\n\"int a(){return 0;}\",x\n\"int b(){return 1;}\",y\n\"int c(){return 2;}\",z\n",
    );
    let c = load_csv_corpus(&p, "func_after", None, None).unwrap();
    let ids: Vec<&str> = c.records().iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids, ["0", "1", "2"]);
    assert_eq!(c.source_kind, SourceKind::CsvDataset);
    assert_eq!(c.skipped_count, 0);
    assert_eq!(c.name, "d");
}

#[test]
fn empty_cells_are_skipped_and_counted() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "d.csv", "func_after\na();\n\"\"\nb();\nc();\n");
    let c = load_csv_corpus(&p, "func_after", None, None).unwrap();
    assert_eq!(c.len(), 3);
    assert_eq!(c.skipped_count, 1);
    // Row indices count skipped rows too.
    let ids: Vec<&str> = c.records().iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids, ["0", "2", "3"]);
}

#[test]
fn quoted_multiline_cells_follow_rfc4180() {
    let dir = tempfile::tempdir().unwrap();
    let src = "int f(char *s)\n{\n\tputs(\"a \\\"quoted\\\" word, here\");\n\treturn 0;\n}";
    let cell = src.replace('"', "\"\"");
    let p = write(dir.path(), "d.csv", &format!("id,func_after\r\nfx,\"{cell}\"\r\n"));
    let c = load_csv_corpus(&p, "func_after", Some("id"), None).unwrap();
    assert_eq!(c.records()[0].id, "fx");
    assert_eq!(c.records()[0].raw_source, src);
    assert_eq!(c.records()[0].raw_source.lines().count(), 5);
}

#[test]
fn errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "d.csv", "code\nx;\n");
    assert!(matches!(load_csv_corpus(&p, "func_after", None, None), Err(IngestError::MissingColumn(c)) if c == "func_after"));
    assert!(matches!(load_csv_corpus(&p, "code", Some("nope"), None), Err(IngestError::MissingColumn(_))));
    let e = write(dir.path(), "e.csv", "func_after\n\"\"\n");
    assert!(matches!(load_csv_corpus(&e, "func_after", None, None), Err(IngestError::EmptyCorpus)));
    assert!(matches!(
        load_csv_corpus(&dir.path().join("missing.csv"), "func_after", None, None),
        Err(IngestError::Io { .. })
    ));
    let dup = write(dir.path(), "dup.csv", "id,func_after\na,x;\na,y;\n");
    assert!(matches!(load_csv_corpus(&dup, "func_after", Some("id"), None), Err(IngestError::DuplicateId(_))));
}

#[test]
fn limit_caps_rows_read() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "d.csv", "func_after\na;\nb;\nc;\nd;\n");
    assert_eq!(load_csv_corpus(&p, "func_after", None, Some(2)).unwrap().len(), 2);
}

#[test]
fn invalid_utf8_cells_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.csv");
    let mut bytes = b"func_after\na;\n".to_vec();
    bytes.extend_from_slice(&[0xff, 0xfe, b'\n']);
    bytes.extend_from_slice(b"b;\n");
    fs::write(&p, bytes).unwrap();
    let c = load_csv_corpus(&p, "func_after", None, None).unwrap();
    assert_eq!((c.len(), c.skipped_count), (2, 1));
}

#[test]
fn synthetic_corpus_round_trips_through_csv() {
    let synth = generate(SynthConfig::default());
    let original = to_corpus("train", &synth.train).unwrap();
    let mut buf = Vec::new();
    write_csv_corpus(&original, "func_after", &mut buf).unwrap();
    let opts = CsvOptions {
        id_column: Some("id".into()),
        ..CsvOptions::default()
    };
    let reloaded = read_csv_corpus(buf.as_slice(), Path::new("mem"), "train", &opts).unwrap();
    assert_eq!(reloaded.records(), original.records());
    let mut again = Vec::new();
    write_csv_corpus(&reloaded, "func_after", &mut again).unwrap();
    assert_eq!(buf, again);
}

const TWO_FUNCS: &str = "#include <stdio.h>\n\nint first(int a)\n{\n\treturn a + 1;\n}\n\nstatic void second(char *s)\n{\n\tchar *t = \"{\";\n\tputs(t);\n}\n";

#[test]
fn one_file_with_two_functions() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "src/a.c", TWO_FUNCS);
    let c = scan_source_tree(dir.path(), &default_extensions()).unwrap();
    let ids: Vec<&str> = c.records().iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids, ["src/a.c#3", "src/a.c#8"]);
    assert_eq!(c.source_kind, SourceKind::SourceTree);
    assert!(c.records()[1].raw_source.contains("puts(t);"));
    assert_eq!(c.records()[0].file_path.as_deref(), Some("src/a.c"));
}

#[test]
fn brace_in_string_literal_does_not_split_function() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "b.c", "void f(void)\n{\n\tchar *s = \"{\";\n\tchar c = '}';\n\tuse(s, c);\n}\n");
    let c = scan_source_tree(dir.path(), &default_extensions()).unwrap();
    assert_eq!(c.len(), 1);
    assert!(c.records()[0].raw_source.trim_end().ends_with('}'));
}

#[test]
fn empty_directory_is_an_empty_corpus() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(scan_source_tree(dir.path(), &default_extensions()), Err(IngestError::EmptyCorpus)));
    write(dir.path(), "notes.txt", TWO_FUNCS);
    assert!(matches!(scan_source_tree(dir.path(), &default_extensions()), Err(IngestError::EmptyCorpus)));
}

#[test]
fn tree_order_is_sorted_regardless_of_creation_order() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let names = ["z.c", "a/b.c", "m.h", "a/a.c"];
    for n in names {
        write(a.path(), n, TWO_FUNCS);
    }
    for n in names.iter().rev() {
        write(b.path(), n, TWO_FUNCS);
    }
    let ids = |d: &Path| -> Vec<String> {
        scan_source_tree(d, &default_extensions()).unwrap().records().iter().map(|r| r.id.clone()).collect()
    };
    assert_eq!(ids(a.path()), ids(b.path()));
    assert_eq!(ids(a.path())[0], "a/a.c#3");
    assert_eq!(ids(a.path()).len(), 8);
}

#[test]
fn extensions_are_configurable_and_input_kind_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "x.cc", TWO_FUNCS);
    let only_cc: BTreeSet<String> = [".cc".to_string()].into();
    assert_eq!(scan_source_tree(dir.path(), &only_cc).unwrap().len(), 2);
    assert_eq!(load_input(dir.path(), &CsvOptions::default(), &only_cc).unwrap().len(), 2);
    let csv = write(dir.path(), "d.csv", "func_after\na;\n");
    assert_eq!(load_input(&csv, &CsvOptions::default(), &default_extensions()).unwrap().source_kind, SourceKind::CsvDataset);
}
