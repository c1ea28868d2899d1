//! Regenerates the bundled fixtures under `fixtures/` at the workspace root:
//! reference meshes for genus 0..3, identity-factorization words, and the
//! TOML configs the command-line examples use. Everything is deterministic,
//! so reruns are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use lefschetz::mcg::{elliptic_word, write_word, Chirality, Curve, Letter, MonodromyWord, SymplecticSpace};
use lefschetz::mesh::gen::{flat_torus, polygon_scheme, sphere, tetrahedron};
use lefschetz::mesh::io::write_mesh;
use lefschetz::mesh::TriSurface;

fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn put_mesh(dir: &Path, name: &str, surface: &TriSurface) {
    assert!(surface.validate().passes(), "{name} failed validation");
    let path = dir.join(name);
    write_mesh(surface, &path).expect("write mesh");
    println!(
        "{name}: V={} E={} F={} chi={}",
        surface.num_vertices(),
        surface.num_edges(),
        surface.num_triangles(),
        surface.euler_characteristic()
    );
}

fn put_word(dir: &Path, name: &str, word: &MonodromyWord) {
    assert!(
        word.is_identity_factorization(),
        "{name} is not an identity factorization"
    );
    write_word(word, dir.join(name)).expect("write word");
    println!("{name}: g={} letters={}", word.genus(), word.len());
}

fn right(space: &SymplecticSpace, class: &[i64]) -> Letter {
    Letter::Twist {
        curve: Curve::nonseparating_i64(space, class).unwrap(),
        chirality: Chirality::Right,
    }
}

/// Genus-2 word from the five-curve chain relation. The chain classes are
/// `a1, b1, a1 + a2, b2, a2`; consecutive curves meet once, all other pairs
/// are disjoint, and the sixth power of the chain product is the identity.
fn chain_word_genus2() -> MonodromyWord {
    let space = SymplecticSpace::new(2);
    let chain = [
        [1, 0, 0, 0],
        [0, 0, 1, 0],
        [1, 1, 0, 0],
        [0, 0, 0, 1],
        [0, 1, 0, 0],
    ];
    let mut letters = Vec::with_capacity(30);
    for _ in 0..6 {
        for class in &chain {
            letters.push(right(&space, class));
        }
    }
    MonodromyWord::new(space, letters)
}

/// Genus-2 word with a separating vanishing cycle: the two-curve chain
/// relation `(t_a1 t_b1)^6 = t_sep` rearranged into an identity
/// factorization by appending the left-handed separating twist.
fn separating_word_genus2() -> MonodromyWord {
    let space = SymplecticSpace::new(2);
    let mut letters = Vec::with_capacity(13);
    for _ in 0..6 {
        letters.push(right(&space, &[1, 0, 0, 0]));
        letters.push(right(&space, &[0, 0, 1, 0]));
    }
    letters.push(Letter::Twist {
        curve: Curve::separating(&space, 1).unwrap(),
        chirality: Chirality::Left,
    });
    MonodromyWord::new(space, letters)
}

fn main() {
    let dir = fixtures_dir();
    fs::create_dir_all(&dir).expect("create fixtures dir");

    put_mesh(&dir, "tetra.mesh", &tetrahedron());
    put_mesh(&dir, "sphere_f3.mesh", &sphere(3));
    put_mesh(&dir, "torus_6x6.mesh", &flat_torus(6, 6));
    put_mesh(&dir, "genus2_r5.mesh", &polygon_scheme(2, 5));
    put_mesh(&dir, "genus3_r4.mesh", &polygon_scheme(3, 4));

    put_word(&dir, "e1.word", &elliptic_word(1));
    put_word(&dir, "e2.word", &elliptic_word(2));
    put_word(&dir, "e3.word", &elliptic_word(3));
    put_word(&dir, "chain_g2.word", &chain_word_genus2());
    put_word(&dir, "sep_g2.word", &separating_word_genus2());
    let e1 = elliptic_word(1);
    put_word(&dir, "mixed_g1.word", &e1.concat(&e1.mirror()).unwrap());
    put_word(
        &dir,
        "empty_g1.word",
        &MonodromyWord::empty(SymplecticSpace::new(1)),
    );

    fs::write(
        dir.join("flow.toml"),
        "[flow]\ntol = 1e-8\nmonitor_every = 4\n",
    )
    .expect("write flow config");
    fs::write(
        dir.join("family_loop.toml"),
        "[flow]\ntol = 1e-8\nmonitor_every = 4\n\n[family]\nbase = \"loop\"\npoints = 32\namplitude = 0.2\nseed = 11\nmodes = 12\n",
    )
    .expect("write family config");
    println!("fixtures written to {}", dir.display());
}
