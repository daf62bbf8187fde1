"""Fluctuation identities for a spectrally negative Lévy process switching at Poisson epochs."""
