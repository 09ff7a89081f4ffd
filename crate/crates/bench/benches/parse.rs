use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use vlp_core::perception::{parse_list_response, Shape};

const CLEAN: &str = "Here is the scene:\n```python\nobjects = [['cake', 'red', 'round'], ['table', 'wooden'], ['person', 'smiling'], ['candles']]\n```";
const BROKEN: &str = "objects = [['cake', 'red', 'round'], ['table', 'wooden'], ['person', \"smiling\"], ['candles'";

fn parsing(c: &mut Criterion) {
    c.bench_function("parse well-formed scene", |b| b.iter(|| parse_list_response(black_box(CLEAN), Shape::Nested)));
    c.bench_function("parse and repair truncated scene", |b| b.iter(|| parse_list_response(black_box(BROKEN), Shape::Nested)));
}

criterion_group!(benches, parsing);
criterion_main!(benches);
