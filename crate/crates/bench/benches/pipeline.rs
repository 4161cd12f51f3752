use charie::network::{NetworkDims, NetworkParams};
use charie::parser::parse_document;
use charie::pipeline::prepare_document;
use charie_bench::{encoded, fixture};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn parse(c: &mut Criterion) {
    let (corpus, res) = fixture(200);
    let docs: Vec<_> = corpus.documents.iter().map(|d| d.to_document()).collect();
    c.bench_function("parse 200 documents", |b| {
        b.iter(|| {
            for d in &docs {
                black_box(parse_document(d, &res.symbols, &res.constraints, res.encoder.section_width));
            }
        })
    });
    c.bench_function("parse, score and encode 200 documents", |b| {
        b.iter(|| {
            for d in &docs {
                black_box(prepare_document(d, &res, false).unwrap());
            }
        })
    });
}

fn network(c: &mut Criterion) {
    let (corpus, res) = fixture(100);
    let batch: Vec<_> = encoded(&corpus, &res).into_iter().take(32).collect();
    let params = NetworkParams::init(NetworkDims::default(), 0.08, 1);
    c.bench_function("lstm forward, batch of 32", |b| {
        b.iter(|| {
            for e in &batch {
                black_box(params.forward(e).unwrap());
            }
        })
    });
    c.bench_function("lstm forward+backward, batch of 32", |b| b.iter(|| black_box(params.backward(&batch).unwrap())));
}

criterion_group!(benches, parse, network);
criterion_main!(benches);
