# Collision anticipation toolkit package
