//! Uniform access to the trainable arrays of a model.

/// Implemented by every container of trainable values. Segments are visited
/// in a fixed order with a dotted path name.
pub trait Parameters {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f64]));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64]));

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, s| n += s.len());
        n
    }

    /// All parameters concatenated in visiting order.
    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit("", &mut |_, s| out.extend_from_slice(s));
        out
    }

    /// Inverse of [`Parameters::flatten`].
    fn assign_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        self.visit_mut("", &mut |_, s| {
            s.copy_from_slice(&flat[offset..offset + s.len()]);
            offset += s.len();
        });
        assert_eq!(offset, flat.len(), "flat parameter length mismatch");
    }

    fn zero(&mut self) {
        self.visit_mut("", &mut |_, s| s.iter_mut().for_each(|v| *v = 0.0));
    }

    /// Segment names and lengths, for shape checks.
    fn layout(&self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        self.visit("", &mut |name, s| out.push((name.to_string(), s.len())));
        out
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}
