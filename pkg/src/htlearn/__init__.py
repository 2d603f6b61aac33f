"""Statistical learning from survey samples with Horvitz-Thompson weighted risks."""
