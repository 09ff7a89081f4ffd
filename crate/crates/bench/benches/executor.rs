use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use vlp_core::dsl::{sexpr, Builtin, Catalog};
use vlp_core::executor::evaluate;
use vlp_core::scene::{ImageScenes, Scene};

const PROGRAMS: &[&str] = &[
    "(exists_object (get_objects IMG) cake)",
    "(and (exists_object_with_property (get_objects IMG) table wooden) (not (exists_action (get_actions IMG) eating)))",
    "(exists_action_with_object (get_actions IMG) cutting cake)",
];

fn scenes() -> ImageScenes {
    let objects: Vec<Vec<String>> = (0..30)
        .map(|i| vec![["cake", "dog", "table", "person", "cup"][i % 5].to_string(), ["red", "wooden", "small"][i % 3].to_string()])
        .collect();
    let actions: Vec<Vec<String>> =
        (0..10).map(|i| vec![["eating", "holding", "cutting"][i % 3].to_string(), ["cup", "dog", "cake"][i % 3].to_string()]).collect();
    ImageScenes { objects: Scene::new(objects), actions: Scene::new(actions), size_answers: Default::default() }
}

fn execution(c: &mut Criterion) {
    let catalog = Catalog::new(Builtin::ALL.iter().copied().collect(), 6);
    let programs: Vec<_> = PROGRAMS.iter().map(|p| sexpr::parse_program(p, &catalog).unwrap()).collect();
    let scenes = scenes();
    c.bench_function("evaluate 3 programs on a 40-row image", |b| {
        b.iter(|| programs.iter().filter(|p| evaluate(p, black_box(&scenes)).unwrap()).count())
    });
}

criterion_group!(benches, execution);
criterion_main!(benches);
