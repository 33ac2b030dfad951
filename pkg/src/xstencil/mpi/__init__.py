"""The mpi dialect, its ABI table and the dmp->mpi->func lowerings."""
