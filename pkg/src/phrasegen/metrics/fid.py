"""Frechet distance between Gaussian fits of two latent sets."""

import warnings

import numpy as np
from scipy import linalg


def _moments(x, eps_scale=1e-6):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected an (n, dim) array of latents")
    mu = x.mean(axis=0)
    if x.shape[0] < 2:
        sigma = np.zeros((x.shape[1], x.shape[1]))
    else:
        sigma = np.cov(x, rowvar=False)
    return mu, np.atleast_2d(sigma)


def _regularize(sigma, eps_scale=1e-6):
    dim = sigma.shape[0]
    eps = eps_scale * max(np.trace(sigma), 1.0) / dim
    return sigma + eps * np.eye(dim)


def frechet_distance(mu1, sigma1, mu2, sigma2):
    """||mu1-mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2})."""
    diff = np.asarray(mu1) - np.asarray(mu2)
    covmean, _ = linalg.sqrtm(np.asarray(sigma1) @ np.asarray(sigma2), disp=False)
    if not np.isfinite(covmean).all():
        raise ValueError("covariance square root diverged")
    if np.iscomplexobj(covmean):
        covmean = covmean.real
    value = diff @ diff + np.trace(sigma1) + np.trace(sigma2) - 2 * np.trace(covmean)
    return float(max(value, 0.0))


def phrase_fid(gen_latents, ref_latents):
    """FID over pooled phrase latents of generated vs reference songs.

    Covariances are ridge-regularized when a set is too small (or too
    degenerate) for a well-conditioned estimate; a warning flags it.
    """
    mu1, s1 = _moments(gen_latents)
    mu2, s2 = _moments(ref_latents)
    dim = s1.shape[0]
    n1 = np.asarray(gen_latents).shape[0]
    n2 = np.asarray(ref_latents).shape[0]
    if n1 <= dim or n2 <= dim or min(
            np.linalg.eigvalsh(s1)[0], np.linalg.eigvalsh(s2)[0]) <= 0:
        warnings.warn("degenerate covariance; applying ridge regularization")
        s1 = _regularize(s1)
        s2 = _regularize(s2)
    return frechet_distance(mu1, s1, mu2, s2)
