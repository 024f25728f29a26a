"""Small numpy neural-network substrate with hand-written backward passes."""
