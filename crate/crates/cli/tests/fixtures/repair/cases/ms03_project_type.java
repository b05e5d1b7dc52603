package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void findsStockedItem() {
        Calc calc = new Calc();
        Inventory inventory = new Inventory();
        inventory.add("x", 2);
        assertEquals("found", calc.find("x"));
        assertEquals(2, inventory.count("x"));
    }
}
