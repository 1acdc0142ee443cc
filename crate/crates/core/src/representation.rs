//! A representation of a free group, fixed by the images of its generators.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrixops::{GradedProduct, Svd, UnimodularMatrix, WeylVector};
use crate::words::{next_letters, sphere, GeneratorSet, Letter, Word};

/// Largest prefix length used to split a shell into parallel subtrees.
const SPLIT_DEPTH: usize = 3;

#[derive(Debug, Clone)]
pub struct Representation {
    generators: GeneratorSet,
    /// Matrix of every letter: `2i` is generator `i`, `2i + 1` its inverse.
    letters: Vec<UnimodularMatrix>,
}

impl Representation {
    pub fn new(generators: GeneratorSet, images: Vec<UnimodularMatrix>) -> Result<Self> {
        if images.len() != generators.rank() {
            return Err(Error::Precondition(format!(
                "{} generator images for rank {}",
                images.len(),
                generators.rank()
            )));
        }
        let d = images[0].dim();
        if let Some(bad) = images.iter().find(|g| g.dim() != d) {
            return Err(Error::Shape {
                rows: bad.dim(),
                cols: bad.dim(),
                expected: d,
            });
        }
        let letters = images
            .iter()
            .flat_map(|g| [g.clone(), g.inverse()])
            .collect();
        Ok(Self {
            generators,
            letters,
        })
    }

    /// Representation on standard generator names `a, b, c, ...`.
    pub fn standard(images: Vec<UnimodularMatrix>) -> Result<Self> {
        Self::new(GeneratorSet::standard(images.len()), images)
    }

    pub fn generators(&self) -> &GeneratorSet {
        &self.generators
    }

    pub fn rank(&self) -> usize {
        self.generators.rank()
    }

    pub fn dim(&self) -> usize {
        self.letters[0].dim()
    }

    pub fn letter(&self, l: Letter) -> &UnimodularMatrix {
        &self.letters[l as usize]
    }

    fn check(&self, w: &Word) -> Result<()> {
        if w.rank() != self.rank() {
            return Err(Error::GeneratorMismatch {
                left: w.rank(),
                right: self.rank(),
            });
        }
        Ok(())
    }

    /// `rho(w)` as an explicit matrix.
    pub fn eval(&self, w: &Word) -> Result<UnimodularMatrix> {
        self.check(w)?;
        let mut m = UnimodularMatrix::identity(self.dim()).matrix().clone();
        for &l in w.letters() {
            m *= self.letter(l).matrix();
        }
        Ok(UnimodularMatrix::new_unchecked(m))
    }

    /// `rho(w)` in graded form, accurate for long words.
    pub fn graded(&self, w: &Word) -> Result<GradedProduct> {
        self.check(w)?;
        Ok(GradedProduct::from_factors(
            self.dim(),
            w.letters().iter().map(|&l| self.letter(l).matrix()),
        ))
    }

    pub fn svd(&self, w: &Word) -> Result<Svd> {
        Ok(self.graded(w)?.svd())
    }

    pub fn log_singular_values(&self, w: &Word) -> Result<WeylVector> {
        Ok(self.graded(w)?.log_singular_values())
    }

    /// Folds over every reduced word with length in `min_len..=max_len`, in
    /// lexicographic order within each subtree.
    ///
    /// Subtrees below the prefixes of length `min(min_len, 3)` run in
    /// parallel; their results are combined left to right, so the outcome
    /// does not depend on the thread count.
    pub fn fold_words<A, I, F, C>(
        &self,
        min_len: usize,
        max_len: usize,
        init: I,
        fold: F,
        combine: C,
    ) -> A
    where
        A: Send,
        I: Fn() -> A + Sync,
        F: Fn(A, &Word, &GradedProduct) -> A + Sync,
        C: Fn(A, A) -> A,
    {
        let split = min_len.min(SPLIT_DEPTH);
        let roots = sphere(self.rank(), split);
        let parts: Vec<A> = roots
            .par_iter()
            .map(|root| {
                let gp = self.graded(root).expect("root word has matching rank");
                let mut acc = Some(init());
                self.dfs(root.clone(), gp, min_len, max_len, &mut acc, &fold);
                acc.unwrap()
            })
            .collect();
        let mut it = parts.into_iter();
        let first = it.next().unwrap_or_else(&init);
        it.fold(first, combine)
    }

    fn dfs<A, F>(
        &self,
        w: Word,
        gp: GradedProduct,
        min_len: usize,
        max_len: usize,
        acc: &mut Option<A>,
        fold: &F,
    ) where
        F: Fn(A, &Word, &GradedProduct) -> A,
    {
        if w.len() >= min_len {
            let a = acc.take().unwrap();
            *acc = Some(fold(a, &w, &gp));
        }
        if w.len() == max_len {
            return;
        }
        for l in next_letters(self.rank(), w.last()) {
            let mut child = w.clone();
            child.push_reduced(l);
            let next = gp.pushed(self.letter(l).matrix());
            self.dfs(child, next, min_len, max_len, acc, fold);
        }
    }

    /// `f` applied to every word of length `n`, in sphere order.
    pub fn map_shell<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&Word, &GradedProduct) -> T + Sync,
    {
        self.fold_words(
            n,
            n,
            Vec::new,
            |mut v, w, gp| {
                v.push(f(w, gp));
                v
            },
            |mut a, b| {
                a.extend(b);
                a
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::sphere_size;

    fn diag_pair() -> Representation {
        Representation::standard(vec![
            UnimodularMatrix::diagonal(&[4.0, 1.0, 0.25]).unwrap(),
            UnimodularMatrix::from_rows(&[
                vec![2.0, 1.0, 0.0],
                vec![1.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ])
            .unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn eval_matches_graded() {
        let rho = diag_pair();
        let w = rho.generators().parse("ab'ab").unwrap();
        let explicit = rho.eval(&w).unwrap();
        let graded = rho.graded(&w).unwrap().to_matrix();
        assert!((explicit.matrix() - graded).amax() < 1e-12);
        let id = rho.eval(&Word::identity(2)).unwrap();
        assert_eq!(id, UnimodularMatrix::identity(3));
        assert!(rho.eval(&Word::identity(3)).is_err());
    }

    #[test]
    fn inverse_letters_cancel() {
        let rho = diag_pair();
        for l in 0..4u8 {
            let prod = rho.letter(l).mul(rho.letter(l ^ 1));
            assert!((prod.matrix() - UnimodularMatrix::identity(3).matrix()).amax() < 1e-12);
        }
    }

    #[test]
    fn shells_in_sphere_order() {
        let rho = diag_pair();
        for n in 0..6 {
            let words = rho.map_shell(n, |w, _| w.clone());
            assert_eq!(words, sphere(2, n));
            assert_eq!(words.len() as u128, sphere_size(2, n));
        }
        let count = rho.fold_words(2, 5, || 0usize, |c, _, _| c + 1, |a, b| a + b);
        assert_eq!(
            count as u128,
            (2..=5).map(|n| sphere_size(2, n)).sum::<u128>()
        );
    }

    #[test]
    fn shell_products_match_direct_evaluation() {
        let rho = diag_pair();
        let from_shell = rho.map_shell(4, |_, gp| gp.log_singular_values());
        for (w, l) in sphere(2, 4).iter().zip(from_shell) {
            let direct = rho.log_singular_values(w).unwrap();
            for (a, b) in l.as_slice().iter().zip(direct.as_slice()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
