//! Malformed model outputs and what the repair pass must recover from them.

/// (input, expected rows, repaired)
pub const MALFORMED: &[(&str, &[&[&str]], bool)] = &[
    ("objects = [['dog','brown'],['cat'", &[&["dog", "brown"], &["cat"]], true),
    ("objects = [['a'],['a'],['a'],['a'", &[&["a"]], true),
    ("objects = [['dog', 'brown'], ['cat', 'bla", &[&["dog", "brown"], &["cat", "bla"]], true),
    ("objects = [['dog', 'brown']", &[&["dog", "brown"]], true),
    ("objects = [['dog', 'brown'],", &[&["dog", "brown"]], true),
    ("objects = [['dog', 'brown'], [", &[&["dog", "brown"]], true),
    ("objects = [['dog'], ['dog'], ['dog'], ['dog'], ['dog'], ['dog'], ['do", &[&["dog"], &["do"]], true),
    ("objects = [['cat'], ['dog'], ['dog'], ['dog'], ['dog'", &[&["cat"], &["dog"]], true),
    ("```python\nobjects = [['dog', 'sitting'], ['ball', 'round'], ['ball', 'round'], ['ball', 'rou\n```", &[&["dog", "sitting"], &["ball", "round"], &["ball", "rou"]], true),
    ("```python\nobjects = [['car', 'red'], ['tree'\n", &[&["car", "red"], &["tree"]], true),
    ("objects = [['car', 'red'], ['tree', 'tall']] and some trailing words", &[&["car", "red"], &["tree", "tall"]], false),
    ("Sure! Here you go:\n```python\nobjects = [['car', 'red']]\n```\nHope this helps.", &[&["car", "red"]], false),
    ("objects = [['car', 'red'], ['tree', tall], ['cup']]", &[&["car", "red"]], true),
    ("objects = [['car', 'red'], oops", &[&["car", "red"]], true),
    ("objects = [['car', 'red'] ['tree']]", &[&["car", "red"]], true),
    ("objects = [\"car\", \"tree\"]", &[&["car"], &["tree"]], true),
    ("actions = [['riding', 'person', 'horse'], ['riding', 'person', 'horse'], ['riding', 'person'", &[&["riding", "person", "horse"], &["riding", "person"]], true),
    ("objects = [['Dog', ' Brown '], ['CAT'", &[&["dog", "brown"], &["cat"]], true),
    ("objects = [['dog', \"it's\"], ['cat'", &[&["dog", "it's"], &["cat"]], true),
    ("objects = [['a', 'b'], ['c', 'd'], ['a', 'b'], ['c', 'd'], ['a', 'b'", &[&["a", "b"], &["c", "d"], &["a", "b"], &["c", "d"], &["a", "b"]], true),
    ("objects = [['x'], [], ['y'", &[&["x"], &["y"]], true),
    ("objects = [['x', ''], ['y'", &[&["x"], &["y"]], true),
];
