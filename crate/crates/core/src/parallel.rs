use crate::error::Result;

/// Evaluates `f(0..count)` on up to `threads` scoped workers and returns the
/// results in index order, so output never depends on the thread count.
pub(crate) fn par_map<T, F>(threads: usize, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let threads = threads.clamp(1, count.max(1));
    if threads == 1 {
        return (0..count).map(&f).collect();
    }
    let chunk = count.div_ceil(threads);
    let f = &f;
    let parts: Vec<Result<Vec<T>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let lo = (t * chunk).min(count);
                let hi = ((t + 1) * chunk).min(count);
                scope.spawn(move || (lo..hi).map(f).collect::<Result<Vec<T>>>())
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(count);
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn order_is_independent_of_thread_count() {
        let one = par_map(1, 37, |i| Ok(i * i)).unwrap();
        for t in [2, 3, 8, 100] {
            assert_eq!(par_map(t, 37, |i| Ok(i * i)).unwrap(), one);
        }
        assert!(par_map(4, 0, |i| Ok(i)).unwrap().is_empty());
    }

    #[test]
    fn errors_propagate() {
        let r = par_map(3, 10, |i| if i == 7 { Err(Error::numerical("boom")) } else { Ok(i) });
        assert!(r.is_err());
    }
}
